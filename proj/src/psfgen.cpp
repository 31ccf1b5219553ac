#include "mh3d/psfgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mh3d/fft.hpp"
#include "mh3d/langevin.hpp"
#include "mh3d/parallel.hpp"
#include "mh3d/simulate.hpp"

namespace mh3d {
namespace {

constexpr double kPi = std::numbers::pi;

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

// Wrap an angle into (-pi, pi].
double wrap(double a) {
  a = std::remainder(a, 2.0 * kPi);
  return a <= -kPi ? a + 2.0 * kPi : a;
}

bool centred(const Mesh& mesh) {
  for (int a = 0; a < 3; ++a) {
    const double expect = -0.5 * static_cast<double>(mesh.shape[a] - 1) * mesh.spacing[a];
    if (std::abs(mesh.origin[a] - expect) > 1e-9 * std::max(1.0, mesh.spacing[a])) return false;
  }
  return true;
}

struct Box {
  std::array<std::size_t, 3> half{};
};

// Smallest box centred on the mesh centre holding every voxel above `level`.
Box support_box(const std::vector<const Volume*>& vols, double level) {
  Box b;
  const Shape3 s = vols.front()->shape();
  const std::size_t c[3] = {s.nx / 2, s.ny / 2, s.nz / 2};
  for (const Volume* v : vols) {
    for (std::size_t k = 0; k < s.nz; ++k) {
      for (std::size_t j = 0; j < s.ny; ++j) {
        for (std::size_t i = 0; i < s.nx; ++i) {
          if (std::abs((*v)(i, j, k)) <= level) continue;
          const std::size_t idx[3] = {i, j, k};
          for (int a = 0; a < 3; ++a) {
            const std::size_t d = idx[a] > c[a] ? idx[a] - c[a] : c[a] - idx[a];
            b.half[a] = std::max(b.half[a], d);
          }
        }
      }
    }
  }
  return b;
}

Volume crop_centred(const Volume& v, const Box& b) {
  const Shape3 s = v.shape();
  const std::size_t c[3] = {s.nx / 2, s.ny / 2, s.nz / 2};
  Shape3 out{2 * b.half[0] + 1, 2 * b.half[1] + 1, 2 * b.half[2] + 1};
  Volume r(out);
  for (std::size_t k = 0; k < out.nz; ++k) {
    for (std::size_t j = 0; j < out.ny; ++j) {
      for (std::size_t i = 0; i < out.nx; ++i) {
        r(i, j, k) = v(c[0] - b.half[0] + i, c[1] - b.half[1] + j, c[2] - b.half[2] + k);
      }
    }
  }
  return r;
}

// Makes every z-column sum to zero. The correction is placed on the outer
// sixth of the planes at each end, ramping up towards the faces, where the
// truncated tail of the kernel would have been.
void remove_column_means(Volume& v) {
  const Shape3 s = v.shape();
  const std::size_t m = std::max<std::size_t>(1, s.nz / 6);
  std::vector<double> w(s.nz, 0.0);
  double wsum = 0.0;
  for (std::size_t k = 0; k < m && k < s.nz; ++k) {
    const double r = static_cast<double>(m - k);
    w[k] += r;
    w[s.nz - 1 - k] += r;
  }
  for (double x : w) wsum += x;
  for (std::size_t j = 0; j < s.ny; ++j) {
    for (std::size_t i = 0; i < s.nx; ++i) {
      double sum = 0.0;
      for (std::size_t k = 0; k < s.nz; ++k) sum += v(i, j, k);
      const double c = sum / wsum;
      for (std::size_t k = 0; k < s.nz; ++k) v(i, j, k) -= c * w[k];
    }
  }
}

// Zero-extend (or centre-crop) to `shape`, keeping the centre voxel fixed.
Volume embed_centred(const Volume& v, Shape3 shape) {
  const Shape3 s = v.shape();
  Volume out(shape);
  for (std::size_t k = 0; k < s.nz; ++k) {
    for (std::size_t j = 0; j < s.ny; ++j) {
      for (std::size_t i = 0; i < s.nx; ++i) {
        const long long ti = static_cast<long long>(i) - s.nx / 2 + shape.nx / 2;
        const long long tj = static_cast<long long>(j) - s.ny / 2 + shape.ny / 2;
        const long long tk = static_cast<long long>(k) - s.nz / 2 + shape.nz / 2;
        if (ti < 0 || tj < 0 || tk < 0 || ti >= static_cast<long long>(shape.nx) ||
            tj >= static_cast<long long>(shape.ny) || tk >= static_cast<long long>(shape.nz)) {
          continue;
        }
        out(ti, tj, tk) = v(i, j, k);
      }
    }
  }
  return out;
}

CVolume crop_xy(const CVolume& v, std::size_t margin) {
  if (margin == 0) return v;
  const Shape3 s = v.shape();
  CVolume out({s.nx - 2 * margin, s.ny - 2 * margin, s.nz});
  for (std::size_t k = 0; k < s.nz; ++k) {
    for (std::size_t j = 0; j < out.shape().ny; ++j) {
      for (std::size_t i = 0; i < out.shape().nx; ++i) out(i, j, k) = v(i + margin, j + margin, k);
    }
  }
  return out;
}

double energy(const Volume& v) {
  double e = 0.0;
  for (double x : v) e += x * x;
  return e;
}

// Fourth-order central derivative of samples with spacing h; drops two points per side.
std::vector<double> central_derivative(const std::vector<double>& f, double h) {
  std::vector<double> d(f.size() - 4);
  for (std::size_t i = 2; i + 2 < f.size(); ++i) {
    d[i - 2] = (-f[i + 2] + 8.0 * f[i + 1] - 8.0 * f[i - 1] + f[i - 2]) / (12.0 * h);
  }
  return d;
}

}  // namespace

bool PsfStack::component_active(int c) const {
  return !kernels.empty() && !kernels.front()[c].empty();
}

std::size_t PsfStack::index_of(int k) const {
  const auto it = std::find(harmonics.begin(), harmonics.end(), k);
  if (it == harmonics.end()) {
    throw std::invalid_argument("psf stack: harmonic " + std::to_string(k) + " missing");
  }
  return static_cast<std::size_t>(it - harmonics.begin());
}

void PsfStack::validate() const {
  if (harmonics.empty() || kernels.size() != harmonics.size()) {
    throw std::invalid_argument("psf stack: harmonic/kernel count mismatch");
  }
  bool any = false;
  for (int c = 0; c < 3; ++c) {
    for (const auto& per : kernels) {
      if (per[c].empty() != kernels.front()[c].empty()) {
        throw std::invalid_argument("psf stack: inconsistent active components");
      }
      if (!per[c].empty()) {
        any = true;
        const Shape3 s = per[c].shape();
        if (s.nx % 2 == 0 || s.ny % 2 == 0 || s.nz % 2 == 0) {
          throw std::invalid_argument("psf stack: kernels must have odd extents");
        }
        for (double v : per[c]) {
          if (!std::isfinite(v)) throw std::invalid_argument("psf stack: non-finite kernel");
        }
      }
    }
  }
  if (!any) throw std::invalid_argument("psf stack: no active component");
}

double harmonic_coefficient(int k, double gamma_a) {
  return std::pow(gamma_a, k) / factorial(k - 1);
}

PsfStack simulate_psf(const ScannerConfig& cfg, const std::vector<int>& harmonics,
                      const Mesh& mesh, const PsfOptions& options) {
  mesh.validate();
  if (!centred(mesh)) throw std::invalid_argument("simulate_psf: mesh must be centred on the origin");
  for (int a = 0; a < 3; ++a) {
    if (mesh.shape[a] % 2 == 0) throw std::invalid_argument("simulate_psf: mesh extents must be odd");
  }
  for (int a = 0; a < 2; ++a) {
    if (std::abs(mesh.spacing[a] - cfg.raster.pixel_spacing) > 1e-9 * cfg.raster.pixel_spacing) {
      throw std::invalid_argument("simulate_psf: mesh x/y spacing must equal the raster pixel");
    }
  }
  PsfStack out;
  out.harmonics = harmonics;
  out.mesh = mesh;
  if (mesh.spacing[2] > 1e-3 * (1.0 + 1e-9)) {
    out.warnings.push_back("psf mesh z spacing exceeds 1 mm; kernels may be under-resolved");
  }

  ScannerConfig c = cfg;
  const std::size_t os = options.overscan;
  c.fov = {(mesh.shape.nx - 1 + 2 * os) * mesh.spacing[0],
           (mesh.shape.ny - 1 + 2 * os) * mesh.spacing[1], 0.0};
  c.z_slabs.clear();
  for (std::size_t k = 0; k < mesh.shape.nz; ++k) c.z_slabs.push_back(mesh.axis_coord(2, k));

  std::array<PortraitStack, 3> per_component;
  int reference = -1;
  for (int comp = 2; comp >= 0; --comp) {
    if (options.sensitivity[comp] == 0.0) continue;
    Phantom ph;
    ph.points.push_back({{0.0, 0.0, 0.0}, 1.0});
    ph.sensitivity = {0.0, 0.0, 0.0};
    ph.sensitivity[comp] = 1.0;
    per_component[comp] =
        form_portraits(simulate_all_slabs(ph, c), c, harmonics, options.window, options.grid);
    for (auto& d : per_component[comp].data) d = crop_xy(d, os);
    if (reference < 0) reference = comp;
  }
  if (reference < 0) throw std::invalid_argument("simulate_psf: sensitivity is all zero");

  const ScannerConfig& sc = cfg;
  out.kernels.resize(harmonics.size());
  for (std::size_t h = 0; h < harmonics.size(); ++h) {
    const int k = harmonics[h];
    // Phase mod pi from the data; branch chosen next to the sine-drive value i^{1-k}.
    const double est = estimate_phase(per_component[reference].data[h]);
    const double theory = (1 - k) * 0.5 * kPi;
    const double theta = std::abs(wrap(est - theory)) <= 0.5 * kPi ? est : wrap(est + kPi);

    std::array<Volume, 3> full;
    std::vector<const Volume*> active;
    for (int comp = 0; comp < 3; ++comp) {
      if (per_component[comp].data.empty()) continue;
      full[comp] = apply_phase_correction(per_component[comp].data[h], theta).real;
      active.push_back(&full[comp]);
    }
    double peak = 0.0, total = 0.0;
    for (const Volume* v : active) {
      for (double x : *v) peak = std::max(peak, std::abs(x));
      total += energy(*v);
    }
    const Box box = support_box(active, options.truncation * peak);
    double kept = 0.0;
    for (int comp = 0; comp < 3; ++comp) {
      if (full[comp].empty()) continue;
      Volume kern = crop_centred(full[comp], box);
      kept += energy(kern);
      if (options.zero_mean_columns) remove_column_means(kern);
      out.kernels[h][comp] = std::move(kern);
    }
    PsfNormalization norm;
    norm.harmonic = k;
    norm.prefactor = 2.0 * kPi * sc.magnetic_moment * sc.drive_frequency *
                     harmonic_coefficient(k, sc.gamma_a()) / std::pow(2.0, k);
    norm.phase = theta;
    norm.tail_energy = total > 0.0 ? 1.0 - kept / total : 0.0;
    out.normalization.push_back(norm);
  }
  return out;
}

std::vector<double> analytic_psf_1d(int k, double gamma, double excursion, double scaling,
                                    const std::vector<double>& z) {
  if (k < 2) throw std::invalid_argument("analytic_psf_1d: k >= 2 required");
  const double ck = harmonic_coefficient(k, gamma * excursion);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = scaling * ck * langevin_derivative(gamma * z[i], k);
  }
  return out;
}

Volume analytic_psf_3d(int k, const ScannerConfig& cfg, const Mesh& mesh) {
  if (k < 2) throw std::invalid_argument("analytic_psf_3d: k >= 2 required");
  if (k - 1 > kMaxLangevinOrder) throw std::invalid_argument("analytic_psf_3d: order too high");
  mesh.validate();
  constexpr int kRefine = 5;
  const double h = mesh.spacing[2] / kRefine;
  const int order = k - 1;
  const std::size_t nz = mesh.shape.nz;
  // Refined axis with two extra points per side for each derivative.
  const std::size_t extra = 2 * static_cast<std::size_t>(order);
  const std::size_t nref = (nz - 1) * kRefine + 1 + 2 * extra;
  const double z0 = mesh.origin[2] - static_cast<double>(extra) * h;
  const double g33 = cfg.gradient[2][2];
  const double scale =
      harmonic_coefficient(k, cfg.gamma_a()) / (cfg.beta * g33 * std::pow(cfg.gamma(), order));

  Volume out(mesh.shape);
  parallel_for(mesh.shape.ny, [&](std::size_t j) {
    std::vector<double> f(nref);
    for (std::size_t i = 0; i < mesh.shape.nx; ++i) {
      const double x = mesh.axis_coord(0, i), y = mesh.axis_coord(1, j);
      for (std::size_t r = 0; r < nref; ++r) {
        f[r] = psf_tensor({x, y, z0 + static_cast<double>(r) * h}, cfg)[2][2];
      }
      std::vector<double> d = f;
      for (int o = 0; o < order; ++o) d = central_derivative(d, h);
      for (std::size_t kz = 0; kz < nz; ++kz) out(i, j, kz) = scale * d[kz * kRefine];
    }
  });
  return out;
}

PsfStack analytic_psf_stack(const ScannerConfig& cfg, const std::vector<int>& harmonics,
                            const Mesh& mesh) {
  PsfStack out;
  out.harmonics = harmonics;
  out.mesh = mesh;
  for (int k : harmonics) {
    std::array<Volume, 3> kern;
    kern[2] = analytic_psf_3d(k, cfg, mesh);
    out.kernels.push_back(std::move(kern));
    PsfNormalization n;
    n.harmonic = k;
    n.prefactor = harmonic_coefficient(k, cfg.gamma_a());
    out.normalization.push_back(n);
  }
  return out;
}

std::vector<double> compare_psf(const PsfStack& simulated, const PsfStack& analytic) {
  if (simulated.harmonics != analytic.harmonics) {
    throw std::invalid_argument("compare_psf: harmonic lists differ");
  }
  std::vector<double> out;
  for (std::size_t h = 0; h < simulated.harmonics.size(); ++h) {
    double sa = 0.0, aa = 0.0, ss = 0.0;
    bool any = false;
    for (int c = 0; c < 3; ++c) {
      const Volume& s = simulated.kernel(h, c);
      const Volume& a = analytic.kernel(h, c);
      if (s.empty() && a.empty()) continue;
      if (s.empty() || a.empty()) throw std::invalid_argument("compare_psf: component mismatch");
      any = true;
      const Shape3 common{std::max(s.shape().nx, a.shape().nx), std::max(s.shape().ny, a.shape().ny),
                          std::max(s.shape().nz, a.shape().nz)};
      const Volume se = embed_centred(s, common);
      const Volume ae = embed_centred(a, common);
      for (std::size_t n = 0; n < se.size(); ++n) {
        sa += se[n] * ae[n];
        aa += ae[n] * ae[n];
        ss += se[n] * se[n];
      }
    }
    if (!any) throw std::invalid_argument("compare_psf: no common component");
    if (!(ss > 0.0)) throw std::invalid_argument("compare_psf: simulated kernel is zero");
    const double alpha = aa > 0.0 ? sa / aa : 0.0;
    // ||s - alpha a||^2 = ss - 2 alpha sa + alpha^2 aa
    const double resid = std::max(0.0, ss - 2.0 * alpha * sa + alpha * alpha * aa);
    out.push_back(std::sqrt(resid / ss));
  }
  return out;
}

std::vector<Theorem1Row> verify_theorem1(const ScannerConfig& cfg,
                                         const std::vector<double>& gamma_a_list, int k_max,
                                         const Theorem1Options& options) {
  if (k_max < 2 || k_max > kMaxLangevinOrder) {
    throw std::invalid_argument("verify_theorem1: k_max out of range");
  }
  const double gamma = cfg.gamma();
  const double f0 = cfg.drive_frequency;
  const double w = 2.0 * kPi * f0;
  const int spp = cfg.samples_per_period();
  const double fs = f0 * spp;
  const std::size_t n = options.periods * static_cast<std::size_t>(spp);
  const double duration = static_cast<double>(options.periods) / f0;
  const double delta = options.shift ? options.span / (gamma * duration) : 0.0;
  // Point position so that gamma (t Delta - x0) runs over [-span/2, span/2].
  const double x0 = options.shift ? options.span / (2.0 * gamma) : options.offset / gamma;
  const double m = cfg.magnetic_moment;

  std::vector<Theorem1Row> rows;
  for (double ga : gamma_a_list) {
    if (!(std::abs(ga) < kPi)) throw std::invalid_argument("verify_theorem1: |gamma A| must be < pi");
    const double a = ga / gamma;
    std::vector<cdouble> s(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / fs;
      const cdouble e = std::polar(1.0, w * t);
      const cdouble xi = a * e + t * delta;
      const cdouble v = cdouble(0.0, w) * a * e + delta;
      s[i] = m * v * gamma * langevin_derivative(gamma * (xi - x0), 1);
    }
    const std::size_t lo = static_cast<std::size_t>(0.5 * (1.0 - options.interior) * n);
    const std::size_t hi = n - lo;
    for (int k = 2; k <= k_max; ++k) {
      const std::vector<cdouble> env =
          harmonic_filter(s, fs, k, WindowSpec{}, f0, /*allow_fundamental=*/false);
      const cdouble pre = cdouble(0.0, w * m) * harmonic_coefficient(k, ga);
      double err = 0.0, ref = 0.0, emax = 0.0, emin = 1e300;
      for (std::size_t i = lo; i < hi; ++i) {
        const double t = static_cast<double>(i) / fs;
        const cdouble want = pre * langevin_derivative(gamma * (t * delta - x0), k);
        err += std::norm(env[i] - want);
        ref += std::norm(want);
        emax = std::max(emax, std::abs(env[i]));
        emin = std::min(emin, std::abs(env[i]));
      }
      Theorem1Row row;
      row.gamma_a = ga;
      row.harmonic = k;
      row.relative_error = ref > 0.0 ? std::sqrt(err / ref) : std::sqrt(err);
      row.envelope_spread = emax > 0.0 ? (emax - emin) / emax : 0.0;
      rows.push_back(row);
    }
  }
  return rows;
}

double taylor_radius(double gamma, double a) {
  return std::sqrt(gamma * gamma * a * a + kPi * kPi) / gamma;
}

std::vector<double> taylor_partial_sums(double gamma, double a, double b, int terms) {
  if (terms < 1) throw std::invalid_argument("taylor_partial_sums: terms >= 1");
  // Coefficients of g(w) = L'(gamma a + w) from a Cauchy integral on |w| = r.
  const double radius = gamma * taylor_radius(gamma, a);
  const double r = 0.97 * radius;
  const std::size_t m = 8192;
  std::vector<cdouble> samples(m);
  for (std::size_t j = 0; j < m; ++j) {
    const cdouble w = std::polar(r, 2.0 * kPi * static_cast<double>(j) / m);
    samples[j] = langevin_derivative(cdouble(gamma * a, 0.0) + w, 1);
  }
  const std::vector<cdouble> spec = fft::forward(samples);
  // h(a + b) = gamma g(gamma b) = gamma sum_j c_j (gamma b)^j, c_j r^j = spec_j / m
  const double ratio = gamma * b / r;
  std::vector<double> sums(static_cast<std::size_t>(terms));
  double acc = 0.0, pw = 1.0;
  for (int j = 0; j < terms; ++j) {
    acc += gamma * (spec[static_cast<std::size_t>(j)].real() / static_cast<double>(m)) * pw;
    sums[static_cast<std::size_t>(j)] = acc;
    pw *= ratio;
  }
  return sums;
}

Mesh psf_mesh(const ScannerConfig& cfg, const std::array<std::size_t, 3>& half_extent,
              double fine_dz) {
  const double px = cfg.raster.pixel_spacing;
  return Mesh::centered({2 * half_extent[0] + 1, 2 * half_extent[1] + 1, 2 * half_extent[2] + 1},
                        {px, px, fine_dz});
}

PsfStack select_harmonics(const PsfStack& stack, const std::vector<int>& harmonics) {
  PsfStack out;
  out.mesh = stack.mesh;
  out.warnings = stack.warnings;
  for (int k : harmonics) {
    const std::size_t h = stack.index_of(k);
    out.harmonics.push_back(k);
    out.kernels.push_back(stack.kernels[h]);
    out.normalization.push_back(stack.normalization[h]);
  }
  return out;
}

}  // namespace mh3d
