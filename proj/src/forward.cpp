#include "mh3d/forward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <random>
#include <string>

#include "mh3d/simd.hpp"

namespace mh3d {
namespace {

using Spectrum = fft::AlignedVector<cdouble>;

std::size_t wrap_index(long long i, std::size_t n) {
  const long long m = static_cast<long long>(n);
  return static_cast<std::size_t>(((i % m) + m) % m);
}

// Accumulate a centred kernel into a periodic array with the centre at index 0.
void place_kernel(const Volume& kernel, fft::AlignedVector<double>& dst, const Shape3& padded) {
  const Shape3 s = kernel.shape();
  const long long cx = s.nx / 2, cy = s.ny / 2, cz = s.nz / 2;
  for (std::size_t k = 0; k < s.nz; ++k) {
    const std::size_t z = wrap_index(static_cast<long long>(k) - cz, padded.nz);
    for (std::size_t j = 0; j < s.ny; ++j) {
      const std::size_t y = wrap_index(static_cast<long long>(j) - cy, padded.ny);
      for (std::size_t i = 0; i < s.nx; ++i) {
        const std::size_t x = wrap_index(static_cast<long long>(i) - cx, padded.nx);
        dst[x + padded.nx * (y + padded.ny * z)] += kernel(i, j, k);
      }
    }
  }
}

Volume extend_map(const Volume& map, const Shape3& padded, const std::array<std::size_t, 3>& off) {
  const Shape3 s = map.shape();
  Volume out(padded);
  for (std::size_t k = 0; k < padded.nz; ++k) {
    const std::size_t sk = std::min<std::size_t>(
        s.nz - 1, static_cast<std::size_t>(std::max<long long>(0, (long long)k - (long long)off[2])));
    for (std::size_t j = 0; j < padded.ny; ++j) {
      const std::size_t sj = std::min<std::size_t>(
          s.ny - 1, static_cast<std::size_t>(std::max<long long>(0, (long long)j - (long long)off[1])));
      for (std::size_t i = 0; i < padded.nx; ++i) {
        const std::size_t si = std::min<std::size_t>(
            s.nx - 1, static_cast<std::size_t>(std::max<long long>(0, (long long)i - (long long)off[0])));
        out(i, j, k) = map(si, sj, sk);
      }
    }
  }
  return out;
}

}  // namespace

Volume ForwardModel::embed(const Volume& fov) const {
  require_same_shape(fov.shape(), fov_, "ForwardModel::embed");
  Volume out(padded_);
  for (std::size_t k = 0; k < fov_.nz; ++k) {
    for (std::size_t j = 0; j < fov_.ny; ++j) {
      std::copy(&fov(0, j, k), &fov(0, j, k) + fov_.nx,
                &out(offset_[0], j + offset_[1], k + offset_[2]));
    }
  }
  return out;
}

Volume ForwardModel::crop(const Volume& padded) const {
  require_same_shape(padded.shape(), padded_, "ForwardModel::crop");
  Volume out(fov_);
  for (std::size_t k = 0; k < fov_.nz; ++k) {
    for (std::size_t j = 0; j < fov_.ny; ++j) {
      const double* src = &padded(offset_[0], j + offset_[1], k + offset_[2]);
      std::copy(src, src + fov_.nx, &out(0, j, k));
    }
  }
  return out;
}

void ForwardModel::forward(std::span<const double> rho, std::span<double> data) const {
  if (rho.size() != image_size() || data.size() != data_size()) {
    throw std::invalid_argument("apply_forward: size mismatch");
  }
  const std::size_t nspec = fft_->spectrum_size();
  fft::AlignedVector<double> work(image_size());
  std::array<Spectrum, 3> image_spec;
  for (int c = 0; c < 3; ++c) {
    if (!active_[c]) continue;
    if (!maps_[c].empty()) {
      simd::hadamard(rho, maps_[c].values(), work);
    } else {
      for (std::size_t n = 0; n < rho.size(); ++n) work[n] = uniform_[c] * rho[n];
    }
    image_spec[c].resize(nspec);
    fft_->forward(work.data(), image_spec[c].data());
  }
  Spectrum acc(nspec);
  const std::size_t plane = plane_size();
  for (std::size_t h = 0; h < harmonics_.size(); ++h) {
    bool first = true;
    for (int c = 0; c < 3; ++c) {
      if (!active_[c]) continue;
      if (first) {
        simd::cmul(spectra_[h][c], image_spec[c], acc);
        first = false;
      } else {
        simd::cmul_acc(spectra_[h][c], image_spec[c], acc);
      }
    }
    fft_->inverse(acc.data(), work.data());
    for (std::size_t s = 0; s < slab_selector_.size(); ++s) {
      const std::size_t z = slab_selector_[s] + offset_[2];
      double* out = data.data() + (h * slab_selector_.size() + s) * plane;
      for (std::size_t y = 0; y < fov_.ny; ++y) {
        const double* src = work.data() + offset_[0] + padded_.nx * (y + offset_[1] + padded_.ny * z);
        std::copy(src, src + fov_.nx, out + y * fov_.nx);
      }
    }
  }
}

void ForwardModel::adjoint(std::span<const double> data, std::span<double> rho) const {
  if (rho.size() != image_size() || data.size() != data_size()) {
    throw std::invalid_argument("apply_adjoint: size mismatch");
  }
  const std::size_t nspec = fft_->spectrum_size();
  fft::AlignedVector<double> work(image_size());
  Spectrum dspec(nspec);
  std::array<Spectrum, 3> acc;
  for (int c = 0; c < 3; ++c) {
    if (active_[c]) acc[c].assign(nspec, cdouble{});
  }
  const std::size_t plane = plane_size();
  for (std::size_t h = 0; h < harmonics_.size(); ++h) {
    std::fill(work.begin(), work.end(), 0.0);
    for (std::size_t s = 0; s < slab_selector_.size(); ++s) {
      const std::size_t z = slab_selector_[s] + offset_[2];
      const double* in = data.data() + (h * slab_selector_.size() + s) * plane;
      for (std::size_t y = 0; y < fov_.ny; ++y) {
        double* dst = work.data() + offset_[0] + padded_.nx * (y + offset_[1] + padded_.ny * z);
        for (std::size_t x = 0; x < fov_.nx; ++x) dst[x] += in[y * fov_.nx + x];
      }
    }
    fft_->forward(work.data(), dspec.data());
    for (int c = 0; c < 3; ++c) {
      if (active_[c]) simd::cmulc_acc(spectra_[h][c], dspec, acc[c]);
    }
  }
  std::fill(rho.begin(), rho.end(), 0.0);
  for (int c = 0; c < 3; ++c) {
    if (!active_[c]) continue;
    fft_->inverse(acc[c].data(), work.data());
    if (!maps_[c].empty()) {
      simd::hadamard_acc(work, maps_[c].values(), rho);
    } else {
      simd::axpy(uniform_[c], work, rho);
    }
  }
}

ForwardModel build_forward_model(const std::vector<int>& harmonics,
                                 const std::vector<std::array<Volume, 3>>& kernels,
                                 const Sensitivity& sensitivity, const ForwardGeometry& geometry) {
  if (harmonics.empty() || kernels.size() != harmonics.size()) {
    throw std::invalid_argument("build_forward_model: one kernel set per harmonic required");
  }
  geometry.fine_mesh.validate();
  if (geometry.slab_z.empty()) throw std::invalid_argument("build_forward_model: no slabs");

  ForwardModel m;
  m.harmonics_ = harmonics;
  m.fine_mesh_ = geometry.fine_mesh;
  m.fov_ = geometry.fine_mesh.shape;
  m.offset_ = geometry.pad;
  Shape3 padded{m.fov_.nx + 2 * geometry.pad[0], m.fov_.ny + 2 * geometry.pad[1],
                m.fov_.nz + 2 * geometry.pad[2]};
  if (geometry.smooth_sizes) {
    padded = {next_smooth_size(padded.nx), next_smooth_size(padded.ny), next_smooth_size(padded.nz)};
  }
  m.padded_ = padded;
  m.padded_mesh_.shape = padded;
  m.padded_mesh_.spacing = geometry.fine_mesh.spacing;
  for (int a = 0; a < 3; ++a) {
    m.padded_mesh_.origin[a] =
        geometry.fine_mesh.origin[a] - static_cast<double>(m.offset_[a]) * geometry.fine_mesh.spacing[a];
  }

  // Slab planes snapped to the fine mesh.
  const double dz = geometry.fine_mesh.spacing[2];
  for (double z : geometry.slab_z) {
    const double u = (z - geometry.fine_mesh.origin[2]) / dz;
    const double r = std::round(u);
    if (std::abs(u - r) > 0.5 + 1e-9 || r < 0.0 || r >= static_cast<double>(m.fov_.nz)) {
      throw std::invalid_argument("build_forward_model: slab z = " + std::to_string(z) +
                                  " m is not on the fine mesh");
    }
    const std::size_t idx = static_cast<std::size_t>(r);
    if (!m.slab_selector_.empty() && idx <= m.slab_selector_.back()) {
      throw std::invalid_argument("build_forward_model: slabs must map to increasing planes");
    }
    m.slab_selector_.push_back(idx);
    m.snap_distance_.push_back(std::abs(u - r) * dz);
  }

  for (int c = 0; c < 3; ++c) {
    const bool has_kernel = !kernels.front()[c].empty();
    const bool has_sens = !sensitivity.maps[c].empty() || sensitivity.uniform[c] != 0.0;
    m.active_[c] = has_kernel && has_sens;
    m.uniform_[c] = sensitivity.uniform[c];
    if (m.active_[c] && !sensitivity.maps[c].empty()) {
      require_same_shape(sensitivity.maps[c].shape(), m.fov_, "sensitivity map");
      m.maps_[c] = extend_map(sensitivity.maps[c], padded, m.offset_);
    }
  }
  if (!m.active_[0] && !m.active_[1] && !m.active_[2]) {
    throw std::invalid_argument("build_forward_model: no receive component has both kernel and sensitivity");
  }

  m.fft_ = std::make_shared<const fft::Real3D>(padded);
  const double scale = 1.0 / static_cast<double>(padded.size());
  m.spectra_.resize(harmonics.size());
  m.kernel_energy_.assign(harmonics.size(), 0.0);
  fft::AlignedVector<double> work(padded.size());
  for (std::size_t h = 0; h < harmonics.size(); ++h) {
    for (int c = 0; c < 3; ++c) {
      if (kernels[h][c].empty() != kernels.front()[c].empty()) {
        throw std::invalid_argument("build_forward_model: inconsistent kernel components");
      }
      if (!m.active_[c]) continue;
      for (double v : kernels[h][c]) m.kernel_energy_[h] += v * v;
      std::fill(work.begin(), work.end(), 0.0);
      place_kernel(kernels[h][c], work, padded);
      auto& spec = m.spectra_[h][c];
      spec.resize(m.fft_->spectrum_size());
      m.fft_->forward(work.data(), spec.data());
      for (auto& v : spec) v *= scale;
    }
  }
  return m;
}

Mesh reconstruction_mesh(const Mesh& portraits, double fine_dz) {
  if (!(fine_dz > 0.0)) throw std::invalid_argument("reconstruction_mesh: fine_dz must be positive");
  Mesh m = portraits;
  const double extent = portraits.spacing[2] * static_cast<double>(portraits.shape.nz - 1);
  m.shape.nz = static_cast<std::size_t>(std::lround(extent / fine_dz)) + 1;
  m.spacing[2] = fine_dz;
  return m;
}

ForwardModel build_forward_model(const PsfStack& psfs, const Sensitivity& sensitivity,
                                 const ForwardGeometry& geometry) {
  psfs.validate();
  for (int a = 0; a < 3; ++a) {
    const double s = geometry.fine_mesh.spacing[a];
    if (std::abs(psfs.mesh.spacing[a] - s) > 1e-6 * s) {
      throw std::invalid_argument("build_forward_model: PSF mesh spacing differs from the fine mesh");
    }
  }
  return build_forward_model(psfs.harmonics, psfs.kernels, sensitivity, geometry);
}

std::array<std::size_t, 3> kernel_half_support(const PsfStack& psfs) {
  std::array<std::size_t, 3> half{};
  for (const auto& per : psfs.kernels) {
    for (const auto& k : per) {
      if (k.empty()) continue;
      for (int a = 0; a < 3; ++a) half[a] = std::max(half[a], k.shape()[a] / 2);
    }
  }
  return half;
}

std::vector<double> apply_forward(const ForwardModel& model, const Volume& rho) {
  require_same_shape(rho.shape(), model.padded_shape(), "apply_forward");
  std::vector<double> out(model.data_size());
  model.forward(rho.values(), out);
  return out;
}

Volume apply_adjoint(const ForwardModel& model, const std::vector<double>& data) {
  Volume out(model.padded_shape());
  model.adjoint(data, out.values());
  return out;
}

std::vector<double> build_dense_oracle(const ForwardModel& model,
                                       const std::vector<std::array<Volume, 3>>& kernels,
                                       const Sensitivity& sensitivity, std::size_t max_voxels) {
  const std::size_t n = model.image_size();
  if (n > max_voxels) {
    throw std::invalid_argument("build_dense_oracle: padded grid has " + std::to_string(n) +
                                " voxels, limit " + std::to_string(max_voxels));
  }
  if (kernels.size() != model.harmonics().size()) {
    throw std::invalid_argument("build_dense_oracle: one kernel set per harmonic required");
  }
  const Shape3 p = model.padded_shape();
  const Shape3 f = model.fov_shape();
  const auto off = model.offset();
  const auto& sel = model.slab_selector();

  // Receive weight of component c at padded voxel (i, j, k): edge-replicated map or uniform.
  auto weight = [&](int c, long long i, long long j, long long k) {
    const Volume& m = sensitivity.maps[c];
    if (m.empty()) return sensitivity.uniform[c];
    auto clamp = [](long long v, long long o, std::size_t len) {
      return static_cast<std::size_t>(std::clamp<long long>(v - o, 0, (long long)len - 1));
    };
    return m(clamp(i, off[0], f.nx), clamp(j, off[1], f.ny), clamp(k, off[2], f.nz));
  };

  const std::size_t rows = model.data_size();
  std::vector<double> dense(rows * n, 0.0);
  const std::size_t plane = model.plane_size();
  for (std::size_t h = 0; h < kernels.size(); ++h) {
    for (int c = 0; c < 3; ++c) {
      if (!model.component_active(c)) continue;
      const Volume& ker = kernels[h][c];
      const Shape3 ks = ker.shape();
      const long long cx = ks.nx / 2, cy = ks.ny / 2, cz = ks.nz / 2;
      for (std::size_t s = 0; s < sel.size(); ++s) {
        const long long Z = static_cast<long long>(sel[s] + off[2]);
        for (std::size_t y = 0; y < f.ny; ++y) {
          const long long Y = static_cast<long long>(y + off[1]);
          for (std::size_t x = 0; x < f.nx; ++x) {
            const long long X = static_cast<long long>(x + off[0]);
            double* row = dense.data() + ((h * sel.size() + s) * plane + y * f.nx + x) * n;
            // Output(X) = sum_v K(X - v) b(v) rho(v): each kernel tap (a, b, d)
            // reaches the voxel v = X - (a - c) on the periodic mesh.
            for (std::size_t d = 0; d < ks.nz; ++d) {
              const std::size_t k = wrap_index(Z - ((long long)d - cz), p.nz);
              for (std::size_t b = 0; b < ks.ny; ++b) {
                const std::size_t j = wrap_index(Y - ((long long)b - cy), p.ny);
                for (std::size_t a = 0; a < ks.nx; ++a) {
                  const std::size_t i = wrap_index(X - ((long long)a - cx), p.nx);
                  row[i + p.nx * (j + p.ny * k)] += ker(a, b, d) * weight(c, i, j, k);
                }
              }
            }
          }
        }
      }
    }
  }
  return dense;
}

std::vector<double> dense_apply(const std::vector<double>& dense, std::size_t rows,
                                std::span<const double> x) {
  const std::size_t n = x.size();
  if (dense.size() != rows * n) throw std::invalid_argument("dense_apply: size mismatch");
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < n; ++c) acc += dense[r * n + c] * x[c];
    out[r] = acc;
  }
  return out;
}

std::vector<double> dense_apply_transpose(const std::vector<double>& dense, std::size_t cols,
                                          std::span<const double> y) {
  const std::size_t rows = y.size();
  if (dense.size() != rows * cols) throw std::invalid_argument("dense_apply_transpose: size mismatch");
  std::vector<double> out(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c] += dense[r * cols + c] * y[r];
  }
  return out;
}

double adjoint_mismatch(const ForwardModel& model, std::size_t pairs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::vector<double> x(model.image_size()), y(model.data_size());
  std::vector<double> ax(model.data_size()), aty(model.image_size());
  double worst = 0.0;
  for (std::size_t t = 0; t < pairs; ++t) {
    for (auto& v : x) v = gauss(rng);
    for (auto& v : y) v = gauss(rng);
    model.forward(x, ax);
    model.adjoint(y, aty);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) lhs += ax[i] * y[i];
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * aty[i];
    const double scale = l2_norm(ax) * l2_norm(y);
    worst = std::max(worst, std::abs(lhs - rhs) / (scale > 0.0 ? scale : 1.0));
  }
  return worst;
}

}  // namespace mh3d
