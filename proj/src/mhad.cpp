#include "mh3d/mhad.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mh3d/fft.hpp"
#include "mh3d/parallel.hpp"
#include "mh3d/psfgen.hpp"

namespace mh3d {
namespace {

std::vector<cdouble> column(const Volume& v, std::size_t i, std::size_t j) {
  const std::size_t nz = v.shape().nz;
  std::vector<cdouble> c(nz);
  for (std::size_t k = 0; k < nz; ++k) c[k] = v(i, j, k);
  return c;
}

}  // namespace

std::vector<cdouble> derivative_kernel(std::size_t length, int order) {
  if (length < 3) throw std::invalid_argument("derivative_kernel: length must be >= 3");
  if (order < 0) throw std::invalid_argument("derivative_kernel: order must be >= 0");
  std::vector<cdouble> out(length);
  for (std::size_t q = 0; q < length; ++q) {
    const double s = 2.0 * std::sin(2.0 * std::numbers::pi * static_cast<double>(q) /
                                    static_cast<double>(length));
    // Exact zeros at DC and (for even N) Nyquist keep the null bins clean.
    const cdouble f = (q == 0 || 2 * q == length) ? cdouble{} : cdouble(0.0, s);
    cdouble p = 1.0;
    for (int o = 0; o < order; ++o) p *= f;
    out[q] = p;
  }
  return out;
}

void MhadConfig::validate() const {
  if (!(lambda >= 0.0)) throw std::invalid_argument("mhad: lambda must be >= 0");
  if (harmonics.empty()) throw std::invalid_argument("mhad: harmonic list is empty");
  for (int k : harmonics) {
    if (k < 2) throw std::invalid_argument("mhad: harmonics must be >= 2");
  }
  if (!(gamma_a > 0.0)) throw std::invalid_argument("mhad: gamma A must be > 0");
}

MhadResult mhad_second(const Volume& d2, double lambda) {
  MhadConfig cfg;
  cfg.lambda = lambda;
  cfg.harmonics = {2};
  // c_2 = gamma A; undo it so the formula carries no scaling.
  cfg.gamma_a = 1.0;
  return mhad_multi(std::vector<Volume>{d2}, cfg);
}

MhadResult mhad_multi(const std::vector<Volume>& portraits, const MhadConfig& cfg) {
  cfg.validate();
  if (portraits.size() != cfg.harmonics.size()) {
    throw std::invalid_argument("mhad_multi: one portrait per harmonic required");
  }
  const Shape3 s = portraits.front().shape();
  for (const auto& p : portraits) require_same_shape(p.shape(), s, "mhad_multi");
  const std::size_t nz = s.nz;

  std::vector<std::vector<cdouble>> fk;
  std::vector<double> inv_c;
  for (int k : cfg.harmonics) {
    fk.push_back(derivative_kernel(nz, k - 1));
    inv_c.push_back(1.0 / harmonic_coefficient(k, cfg.gamma_a));
  }
  std::vector<double> denom(nz, cfg.lambda);
  for (const auto& f : fk) {
    for (std::size_t q = 0; q < nz; ++q) denom[q] += std::norm(f[q]);
  }

  MhadResult result;
  result.native = Volume(s);
  for (double d : denom) result.null_bins += d == 0.0 ? 1 : 0;

  parallel_for(s.ny, [&](std::size_t j) {
    std::vector<cdouble> acc(nz);
    for (std::size_t i = 0; i < s.nx; ++i) {
      std::fill(acc.begin(), acc.end(), cdouble{});
      for (std::size_t h = 0; h < portraits.size(); ++h) {
        const auto spec = fft::forward(column(portraits[h], i, j));
        for (std::size_t q = 0; q < nz; ++q) acc[q] += inv_c[h] * std::conj(fk[h][q]) * spec[q];
      }
      for (std::size_t q = 0; q < nz; ++q) acc[q] = denom[q] > 0.0 ? acc[q] / denom[q] : cdouble{};
      const auto out = fft::inverse(acc);
      for (std::size_t k = 0; k < nz; ++k) result.native(i, j, k) = out[k].real();
    }
  });
  return result;
}

MhadResult mhad_multi(const PortraitStack& stack, const MhadConfig& cfg) {
  std::vector<Volume> portraits;
  for (int k : cfg.harmonics) {
    const CVolume& d = stack.data.at(stack.index_of(k));
    Volume r(d.shape());
    for (std::size_t n = 0; n < d.size(); ++n) r[n] = d[n].real();
    portraits.push_back(std::move(r));
  }
  MhadResult result = mhad_multi(portraits, cfg);
  if (stack.mesh.spacing[2] > 2.0 * cfg.fine_dz * (1.0 + 1e-9)) {
    result.warnings.push_back("slab spacing exceeds twice the fine z spacing; MHAD needs dense z sampling");
  }
  if (!stack.phase_corrected) {
    result.warnings.push_back("portraits are not phase corrected; using their real parts");
  }
  return result;
}

std::vector<Volume> mhad_synthesize(const Volume& native, const MhadConfig& cfg) {
  cfg.validate();
  const Shape3 s = native.shape();
  std::vector<Volume> out;
  for (int k : cfg.harmonics) {
    const auto f = derivative_kernel(s.nz, k - 1);
    const double c = harmonic_coefficient(k, cfg.gamma_a);
    Volume d(s);
    for (std::size_t j = 0; j < s.ny; ++j) {
      for (std::size_t i = 0; i < s.nx; ++i) {
        auto spec = fft::forward(column(native, i, j));
        for (std::size_t q = 0; q < s.nz; ++q) spec[q] *= c * f[q];
        const auto col = fft::inverse(spec);
        for (std::size_t k2 = 0; k2 < s.nz; ++k2) d(i, j, k2) = col[k2].real();
      }
    }
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace mh3d
