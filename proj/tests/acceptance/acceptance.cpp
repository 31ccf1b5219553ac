// Acceptance criteria AC1-AC11. One PASS/FAIL line per criterion; the exit
// status is non-zero if any criterion fails. Pass criterion names (AC3 AC9)
// to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mh3d/analyze.hpp"
#include "mh3d/forward.hpp"
#include "mh3d/mhad.hpp"
#include "mh3d/portrait.hpp"
#include "mh3d/psfgen.hpp"
#include "mh3d/simulate.hpp"
#include "mh3d/solve.hpp"

using namespace mh3d;

namespace {

// Tolerances.
constexpr double kAc1MaxError = 1e-3;  // tightened from 5% after measuring ~2e-4
constexpr double kAc2MaxError = 0.10;
constexpr double kAc3Adjoint = 1e-9;
constexpr double kAc3Dense = 1e-10;
constexpr double kAc4MaxRatio = 1e-3;
constexpr double kAc5MinRatio = 10.0;
constexpr double kAc6MinRatio = 5.0;
constexpr double kAc9Exact = 1e-10;
constexpr double kAc9Solver = 1e-6;
constexpr double kAc10MaxSeconds = 600.0;
constexpr double kAc11Gradient = 1e-5;

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Simulated scanner, PSF and portraits for the imaging criteria.
struct Bench {
  ScannerConfig cfg = reference_preset();
  std::vector<int> harmonics{2, 3, 4, 5};
  double fine_dz = 1e-3;
  PsfStack psf;

  Bench(Vec3 fov, std::vector<double> slabs) {
    cfg.fov = fov;
    cfg.z_slabs = std::move(slabs);
  }

  void make_psf(std::size_t hxy, std::size_t hz, bool zero_mean = true) {
    PsfOptions o;
    o.zero_mean_columns = zero_mean;
    psf = simulate_psf(cfg, harmonics, psf_mesh(cfg, {hxy, hxy, hz}, fine_dz), o);
  }

  Mesh fine_mesh() const { return reconstruction_mesh(portrait_mesh(cfg), fine_dz); }

  ForwardModel model(const std::vector<int>& hs, std::array<std::size_t, 3> pad,
                     bool smooth = true) const {
    ForwardGeometry g;
    g.fine_mesh = fine_mesh();
    g.slab_z = cfg.z_slabs;
    g.pad = pad;
    g.smooth_sizes = smooth;
    return build_forward_model(select_harmonics(psf, hs), Sensitivity{}, g);
  }
  ForwardModel model(const std::vector<int>& hs) const {
    return model(hs, kernel_half_support(psf));
  }

  // Phase-corrected portraits of `ph`; noise std is relative to the clean signal peak.
  PortraitStack portraits(const Phantom& ph, double relative_noise, std::uint64_t seed) const {
    auto sig = simulate_all_slabs(ph, cfg);
    if (relative_noise > 0.0) {
      double peak = 0.0;
      for (const auto& s : sig) {
        for (double v : s.samples) peak = std::max(peak, std::abs(v));
      }
      for (auto& s : sig) s = add_noise(s, relative_noise * peak, seed);
    }
    auto st = form_portraits(sig, cfg, harmonics, WindowSpec{});
    std::vector<double> phases;
    for (int k : harmonics) phases.push_back(psf.normalization[psf.index_of(k)].phase);
    apply_phase_correction(st, phases);
    return st;
  }

  static std::vector<double> data(const PortraitStack& st, const std::vector<int>& hs) {
    return stack_to_data(select_harmonics(st, hs));
  }

  Index3 voxel_of(const Vec3& p) const {
    const Mesh m = fine_mesh();
    auto at = [&](int a) {
      return static_cast<std::ptrdiff_t>(std::lround((p[a] - m.origin[a]) / m.spacing[a]));
    };
    return {at(0), at(1), at(2)};
  }
};

// ------------------------------------------------------------------ AC1

Outcome ac1() {
  const auto rows = verify_theorem1(reference_preset(), {0.05, 0.1, 0.3}, 5);
  double worst = 0.0;
  for (const auto& r : rows) {
    if (r.harmonic < 2) continue;
    worst = std::max(worst, r.relative_error);
  }
  return {worst < kAc1MaxError,
          fmt("harmonic envelopes vs scaled Langevin derivatives, gammaA {0.05,0.1,0.3}, k=2..5: "
              "max rel L2 %.2e (limit %.0e)",
              worst, kAc1MaxError)};
}

// ------------------------------------------------------------------ AC2

Outcome ac2() {
  const std::vector<double> sweep{0.1, 0.3, 1.0, 2.0};
  const std::vector<int> hs{2, 3, 4, 5};
  std::vector<std::vector<double>> err;  // [gammaA][k]
  for (double ga : sweep) {
    ScannerConfig cfg = reference_preset();
    cfg.raster.pixel_spacing = 1e-3;
    cfg.drive_amplitude = ga / cfg.beta;  // gamma A = beta B_ex
    const Mesh m = Mesh::centered({41, 41, 41}, {1e-3, 1e-3, 1e-3});
    PsfOptions o;
    o.zero_mean_columns = false;
    err.push_back(compare_psf(simulate_psf(cfg, hs, m, o), analytic_psf_stack(cfg, hs, m)));
  }
  bool pass = true;
  std::string table;
  for (std::size_t h = 0; h < hs.size(); ++h) {
    table += fmt(" k=%d:", hs[h]);
    for (std::size_t g = 0; g < sweep.size(); ++g) {
      table += fmt("%s%.4f", g ? "/" : "", err[g][h]);
      if (g && !(err[g][h] > err[g - 1][h])) pass = false;
      if (hs[h] <= 4 && sweep[g] <= 0.3 && !(err[g][h] < kAc2MaxError)) pass = false;
    }
  }
  return {pass, fmt("simulated vs analytic PSF rel L2 at gammaA 0.1/0.3/1/2 (<%.2f for k<=4 at "
                    "gammaA<=0.3, increasing):%s",
                    kAc2MaxError, table.c_str())};
}

// ------------------------------------------------------------------ AC3

struct RandomModel {
  ForwardModel model;
  std::vector<std::array<Volume, 3>> kernels;
  Sensitivity sensitivity;
};

RandomModel random_model(Shape3 fov, std::array<std::size_t, 3> pad, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  RandomModel r;
  const std::vector<int> hs{2, 3, 4};
  for (std::size_t h = 0; h < hs.size(); ++h) {
    std::array<Volume, 3> per;
    for (int c : {0, 2}) {
      per[c] = Volume({2 * pad[0] + 1, 2 * pad[1] + 1, 2 * pad[2] + 1});
      for (auto& v : per[c]) v = gauss(rng);
    }
    r.kernels.push_back(per);
  }
  r.sensitivity.uniform = {0.3, 0.0, 1.0};
  r.sensitivity.maps[2] = Volume(fov);
  for (auto& v : r.sensitivity.maps[2]) v = 1.0 + 0.3 * gauss(rng);
  ForwardGeometry g;
  g.fine_mesh = Mesh::centered(fov, {2e-3, 2e-3, 1e-3});
  for (std::size_t k = 0; k < fov.nz; k += 2) g.slab_z.push_back(g.fine_mesh.axis_coord(2, k));
  g.pad = pad;
  g.smooth_sizes = false;
  r.model = build_forward_model(hs, r.kernels, r.sensitivity, g);
  return r;
}

double dense_deviation(const RandomModel& r, std::uint64_t seed) {
  const auto& m = r.model;
  const auto dense = build_dense_oracle(m, r.kernels, r.sensitivity);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::vector<double> x(m.image_size()), y(m.data_size()), ax(m.data_size()), aty(m.image_size());
  for (auto& v : x) v = gauss(rng);
  for (auto& v : y) v = gauss(rng);
  m.forward(x, ax);
  m.adjoint(y, aty);
  const auto dx = dense_apply(dense, m.data_size(), x);
  const auto dy = dense_apply_transpose(dense, m.image_size(), y);
  const double sx = max_abs(dx), sy = max_abs(dy);
  double worst = 0.0;
  for (std::size_t i = 0; i < dx.size(); ++i) worst = std::max(worst, std::abs(dx[i] - ax[i]) / sx);
  for (std::size_t i = 0; i < dy.size(); ++i) worst = std::max(worst, std::abs(dy[i] - aty[i]) / sy);
  return worst;
}

Outcome ac3() {
  // Adjoint on a simulated-PSF model and on a random model with sensitivity maps.
  Bench b({16e-3, 16e-3, 0}, {-5e-3, 0.0, 5e-3});
  b.make_psf(6, 10);
  const double adj_psf = adjoint_mismatch(b.model(b.harmonics), 20, 1);
  const double adj_rand = adjoint_mismatch(random_model({10, 9, 12}, {2, 1, 3}, 2).model, 20, 2);
  const auto m8 = random_model({6, 6, 6}, {1, 1, 1}, 3);
  const auto m12 = random_model({8, 8, 8}, {2, 2, 2}, 4);
  if (m8.model.padded_shape() != Shape3{8, 8, 8} || m12.model.padded_shape() != Shape3{12, 12, 12}) {
    return {false, "unexpected padded grid sizes"};
  }
  const double d8 = dense_deviation(m8, 5), d12 = dense_deviation(m12, 6);
  const double adj = std::max(adj_psf, adj_rand);
  return {adj < kAc3Adjoint && d8 < kAc3Dense && d12 < kAc3Dense,
          fmt("adjoint 20 pairs %.1e (limit %.0e); dense oracle 8^3 %.1e, 12^3 %.1e (limit %.0e)", adj,
              kAc3Adjoint, d8, d12, kAc3Dense)};
}

// ------------------------------------------------------------------ AC4

Outcome ac4() {
  Bench b({16e-3, 16e-3, 0}, {-10e-3, -5e-3, 0.0, 5e-3, 10e-3});
  auto ratios = [&](bool zero_mean) {
    b.make_psf(12, 20, zero_mean);
    const ForwardModel m = b.model(b.harmonics);
    const Volume ones(m.padded_shape(), 1.0);
    Volume point(m.padded_shape());
    const auto off = m.offset();
    const Shape3 f = m.fov_shape();
    point(off[0] + f.nx / 2, off[1] + f.ny / 2, off[2] + m.slab_selector()[2]) = 1.0;
    const auto dc = apply_forward(m, ones), dp = apply_forward(m, point);
    const std::size_t block = m.data_size() / b.harmonics.size();
    std::vector<double> r;
    for (std::size_t h = 0; h < b.harmonics.size(); ++h) {
      double c = 0.0, p = 0.0;
      for (std::size_t n = h * block; n < (h + 1) * block; ++n) {
        c = std::max(c, std::abs(dc[n]));
        p = std::max(p, std::abs(dp[n]));
      }
      r.push_back(c / p);
    }
    return r;
  };
  const auto raw = ratios(false);
  const auto used = ratios(true);
  double worst = 0.0;
  std::string s, sraw;
  for (std::size_t h = 0; h < used.size(); ++h) {
    worst = std::max(worst, used[h]);
    s += fmt(" %.1e", used[h]);
    sraw += fmt(" %.1e", raw[h]);
  }
  return {worst < kAc4MaxRatio,
          fmt("constant image / unit voxel portrait peak, k=2..5:%s (limit %.0e); untapered kernels:%s",
              s.c_str(), kAc4MaxRatio, sraw.c_str())};
}

// ------------------------------------------------------------------ AC5

Outcome ac5() {
  Bench b({32e-3, 32e-3, 0}, {-10e-3, -5e-3, 0.0, 5e-3, 10e-3});
  b.make_psf(12, 20);
  const Mesh f = b.fine_mesh();
  Phantom ph;
  ph.points = {{{f.origin[0] + f.spacing[0], 0.0, 0.0}, 1.0}};  // one voxel inside the low-x face
  const auto d = Bench::data(b.portraits(ph, 0.0, 1), b.harmonics);
  auto ghost = [&](std::array<std::size_t, 3> pad, bool smooth) {
    SolverConfig sc;
    sc.lambda = 1e-3;
    const auto r = reconstruct(d, b.model(b.harmonics, pad, smooth), sc);
    const Shape3 s = r.rho.shape();
    double e = 0.0;
    for (std::size_t z = 0; z < s.nz; ++z) {
      for (std::size_t y = 0; y < s.ny; ++y) {
        for (std::size_t x = s.nx - s.nx / 4; x < s.nx; ++x) e += r.rho(x, y, z) * r.rho(x, y, z);
      }
    }
    return e;
  };
  const double without = ghost({0, 0, 0}, false);
  const double with = ghost(kernel_half_support(b.psf), true);
  const double ratio = without / with;
  return {ratio >= kAc5MinRatio,
          fmt("ghost energy in opposite-edge quarter: unpadded %.3e, padded %.3e, ratio %.1f (min %.0f)",
              without, with, ratio, kAc5MinRatio)};
}

// ------------------------------------------------------------------ AC6

Outcome ac6() {
  std::vector<double> slabs;
  for (int j = -9; j <= 9; ++j) slabs.push_back(5e-3 * j);
  Bench b({100e-3, 100e-3, 0}, slabs);
  b.make_psf(12, 20);
  const double R = 40e-3;
  Phantom ph;
  ph.points = {{{0, 0, 0}, 1}, {{R, 0, 0}, 1},  {{-R, 0, 0}, 1}, {{0, R, 0}, 1},
               {{0, -R, 0}, 1}, {{0, 0, R}, 1}, {{0, 0, -R}, 1}};
  const auto d = Bench::data(b.portraits(ph, 0.0, 1), b.harmonics);
  const ForwardModel m = b.model(b.harmonics);
  auto run = [&](double alpha, std::set<std::array<std::ptrdiff_t, 3>>& peaks) {
    SolverConfig sc;
    sc.lambda = 1e-3;
    sc.alpha = alpha;
    const auto r = reconstruct(d, m, sc);
    const auto shell = boundary_selector(r.rho.shape(), sc.boundary_margin);
    double mean = 0.0;
    for (auto i : shell) mean += r.rho[i];
    PeakSearch ps;
    ps.max_peaks = ph.points.size();
    for (const auto& p : find_peaks(r.rho, ps)) peaks.insert({p.x, p.y, p.z});
    return mean / static_cast<double>(shell.size());
  };
  std::set<std::array<std::ptrdiff_t, 3>> with, without, truth;
  const double b4 = run(4.0, with), b0 = run(0.0, without);
  for (const auto& p : ph.points) {
    const Index3 v = b.voxel_of(p.position);
    truth.insert({v.x, v.y, v.z});
  }
  const double ratio = b0 / b4;
  return {ratio >= kAc6MinRatio && with == without && with == truth,
          fmt("mean boundary intensity alpha=0 %.3e, alpha=4 %.3e, ratio %.1f (min %.0f); peaks "
              "unchanged: %s, at sources: %s",
              b0, b4, ratio, kAc6MinRatio, with == without ? "yes" : "no", with == truth ? "yes" : "no")};
}

// ------------------------------------------------------------------ AC7

Outcome ac7() {
  Bench b({32e-3, 32e-3, 0}, {-10e-3, -5e-3, 0.0, 5e-3, 10e-3});
  b.make_psf(12, 20);
  const Vec3 pa{-8e-3, 0, 0}, pb{8e-3, 0, 0};
  Phantom ph;
  ph.points = {{pa, 1.0}, {pb, 1.0}};
  const PortraitStack st = b.portraits(ph, 0.005, 7);
  const Index3 a = b.voxel_of(pa), c = b.voxel_of(pb);
  const Vec3 sp = b.fine_mesh().spacing;
  struct Row {
    double fwhm, snr;
  };
  auto measure = [&](const std::vector<int>& hs, double lambda) {
    SolverConfig sc;
    sc.lambda = lambda;
    const auto r = reconstruct(Bench::data(st, hs), b.model(hs), sc);
    const double w = 0.5 * (fwhm(r.rho, sp, 2, a, 1) + fwhm(r.rho, sp, 2, c, 1));
    const std::vector<std::size_t> pk{linear_index(r.rho.shape(), a), linear_index(r.rho.shape(), c)};
    return Row{w, snr_std(r.rho, pk, background_mask(r.rho.shape(), {a, c}, 3))};
  };
  bool pass = true;
  std::string s;
  for (double lambda : {3e-4, 1e-3, 3e-3, 1e-2, 3e-2}) {
    const Row multi = measure({2, 3, 4, 5}, lambda), third = measure({3}, lambda);
    pass = pass && multi.fwhm < third.fwhm && multi.snr > third.snr;
    s += fmt(" [%.0e: %.2f/%.2f mm, %.1f/%.1f]", lambda, multi.fwhm * 1e3, third.fwhm * 1e3, multi.snr,
             third.snr);
  }
  return {pass, fmt("z-FWHM and snr_std, harmonics 2-5 / 3rd only, 0.5%% noise:%s", s.c_str())};
}

// ------------------------------------------------------------------ AC8

Outcome ac8() {
  Bench b({24e-3, 24e-3, 0}, {-10e-3, -5e-3, 0.0, 5e-3, 10e-3});
  b.make_psf(12, 20);
  const Vec3 p1{0, 0, 1e-3}, p2{0, 0, 4e-3};
  Phantom ph;
  ph.points = {{p1, 1.0}, {p2, 1.0}};
  const PortraitStack st = b.portraits(ph, 0.0, 0);
  const Index3 v1 = b.voxel_of(p1), v2 = b.voxel_of(p2);
  // Distinct local maxima of the z-profile within 3 mm of the pair: above 20%
  // of the peak, with a topographic prominence of at least 5% of the peak.
  // The largest value outside that window is reported as the side-lobe level.
  const std::size_t lo = v1.z - 3, hi = v2.z + 3;
  auto maxima = [&](const std::vector<int>& hs, std::string& profile) {
    SolverConfig sc;
    sc.lambda = 1e-5;
    const auto r = reconstruct(Bench::data(st, hs), b.model(hs), sc);
    std::vector<double> z;
    for (std::size_t k = 0; k < r.rho.shape().nz; ++k) z.push_back(r.rho(v1.x, v1.y, k));
    const double top = *std::max_element(z.begin(), z.end());
    std::vector<std::ptrdiff_t> out;
    for (std::size_t k = std::max<std::size_t>(lo, 1); k <= hi && k + 1 < z.size(); ++k) {
      if (!(z[k] > z[k - 1] && z[k] >= z[k + 1] && z[k] > 0.2 * top)) continue;
      double left = z[k], right = z[k];
      for (std::size_t j = k; j-- > 0 && z[j] <= z[k];) left = std::min(left, z[j]);
      for (std::size_t j = k + 1; j < z.size() && z[j] <= z[k]; ++j) right = std::min(right, z[j]);
      if (z[k] - std::max(left, right) >= 0.05 * top) out.push_back(k);
    }
    double side = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
      if (k < lo || k > hi) side = std::max(side, z[k] / top);
    }
    for (std::size_t k = lo; k <= hi; ++k) profile += fmt(" %.2f", z[k] / top);
    profile += ", maxima at z =";
    for (auto k : out) profile += fmt(" %.0f", b.fine_mesh().axis_coord(2, k) * 1e3);
    profile += fmt(" mm, side lobe %.2f", side);
    return out;
  };
  std::string pm, p2only;
  const auto multi = maxima({2, 3, 4, 5}, pm);
  const auto second = maxima({2}, p2only);
  const bool resolved = multi.size() == 2 && std::abs(multi[0] - v1.z) <= 1 && std::abs(multi[1] - v2.z) <= 1;
  return {resolved && second.size() < 2,
          fmt("points 3 mm apart between 5 mm slabs: harmonics 2-5 give %zu maxima (z profile%s), "
              "harmonic 2 gives %zu (z profile%s)",
              multi.size(), pm.c_str(), second.size(), p2only.c_str())};
}

// ------------------------------------------------------------------ AC9

// Centred spatial kernel of the (order)-fold central difference [1, 0, -1].
Volume difference_kernel(int order) {
  std::vector<double> k{1.0};
  for (int o = 0; o < order; ++o) {
    std::vector<double> next(k.size() + 2, 0.0);
    for (std::size_t i = 0; i < k.size(); ++i) {
      next[i] += k[i];
      next[i + 2] -= k[i];
    }
    k = next;
  }
  Volume v({1, 1, k.size()});
  std::copy(k.begin(), k.end(), v.begin());
  return v;
}

Outcome ac9() {
  MhadConfig mc;
  mc.gamma_a = 0.8;
  const std::size_t nz = 33;  // odd: DC is the only null bin
  std::mt19937_64 rng(17);
  std::normal_distribution<double> gauss;
  Volume native({3, 2, nz});
  for (auto& v : native) v = gauss(rng);

  // Exactness modulo DC.
  const auto d = mhad_synthesize(native, mc);
  const auto back = mhad_multi(d, mc);
  double err = 0.0, ref = 0.0;
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t i = 0; i < 3; ++i) {
      double mean = 0.0;
      for (std::size_t k = 0; k < nz; ++k) mean += native(i, j, k) / nz;
      for (std::size_t k = 0; k < nz; ++k) {
        err = std::max(err, std::abs(back.native(i, j, k) - (native(i, j, k) - mean)));
        ref = std::max(ref, std::abs(native(i, j, k)));
      }
    }
  }
  const double exact = err / ref;

  // Regularised MHAD vs the iterative solver on one z-line:
  // min sum_k ||f^(k-1) * rho - d_k / c_k||^2 + lambda ||rho||^2.
  mc.lambda = 0.5;
  Volume line({1, 1, nz});
  for (std::size_t k = 0; k < nz; ++k) line[k] = native(0, 0, k);
  const auto dl = mhad_synthesize(line, mc);
  std::vector<Volume> noisy = dl;
  for (auto& v : noisy) {
    for (auto& x : v) x += 0.1 * gauss(rng);
  }
  const Volume closed = mhad_multi(noisy, mc).native;
  std::vector<std::array<Volume, 3>> kernels;
  std::vector<double> data;
  for (std::size_t h = 0; h < mc.harmonics.size(); ++h) {
    kernels.push_back({Volume{}, Volume{}, difference_kernel(mc.harmonics[h] - 1)});
    const double ck = harmonic_coefficient(mc.harmonics[h], mc.gamma_a);
    for (double x : noisy[h]) data.push_back(x / ck);
  }
  ForwardGeometry g;
  g.fine_mesh = Mesh::centered({1, 1, nz}, {1e-3, 1e-3, 1e-3});
  for (std::size_t k = 0; k < nz; ++k) g.slab_z.push_back(g.fine_mesh.axis_coord(2, k));
  g.smooth_sizes = false;
  const ForwardModel m = build_forward_model(mc.harmonics, kernels, Sensitivity{}, g);
  SolverConfig sc;
  sc.lambda = mc.lambda;
  sc.lambda_scale = LambdaScale::absolute;
  sc.tikhonov_order = 0;
  sc.harmonic_weighting = HarmonicWeighting::none;
  sc.alpha = 0.0;
  sc.nonneg = false;
  sc.max_iterations = 20000;
  sc.tolerance = 0.0;
  const auto r = reconstruct(data, m, sc);
  double dev = 0.0;
  for (std::size_t k = 0; k < nz; ++k) dev = std::max(dev, std::abs(r.rho[k] - closed[k]));
  dev /= max_abs(closed.values());
  return {exact < kAc9Exact && dev < kAc9Solver,
          fmt("synthetic stack recovery modulo DC %.1e (limit %.0e); MHAD vs iterative solver %.1e "
              "after %zu iterations (limit %.0e)",
              exact, kAc9Exact, dev, r.trace.iterations, kAc9Solver)};
}

// ------------------------------------------------------------------ AC10

Outcome ac10() {
  Bench b({74e-3, 74e-3, 0}, {});
  for (int j = -8; j <= 8; ++j) b.cfg.z_slabs.push_back(5e-3 * j);  // fine mesh 38 x 38 x 81
  b.cfg.raster.pixel_spacing = 2e-3;
  b.make_psf(12, 20);
  // 38 + 2*31 = 100 in x/y, 81 + 2*20 = 121 in z.
  const ForwardModel m = b.model(b.harmonics, {31, 31, 20}, false);
  const Shape3 p = m.padded_shape();
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u;
  Volume rho(m.fov_shape());
  for (int n = 0; n < 40; ++n) {
    rho(rng() % rho.shape().nx, rng() % rho.shape().ny, rng() % rho.shape().nz) = u(rng);
  }
  const auto data = apply_forward(m, m.embed(rho));
  SolverConfig sc;
  sc.max_iterations = 500;
  sc.tolerance = 0.0;
  const auto r = reconstruct(data, m, sc);
  const auto& it = r.trace.iteration_seconds;
  std::vector<double> sorted = it;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted.empty() ? 0.0 : sorted[sorted.size() / 2];
  return {p == Shape3{100, 100, 121} && r.trace.iterations == 500 &&
              it.size() == 500 && r.trace.total_seconds <= kAc10MaxSeconds,
          fmt("%s mesh, 4 harmonics, %zu iterations in %.1f s (setup %.1f s, median %.3f s/iter, "
              "limit %.0f s)",
              to_string(p).c_str(), r.trace.iterations, r.trace.total_seconds, r.trace.setup_seconds,
              median, kAc10MaxSeconds)};
}

// ------------------------------------------------------------------ AC11

Outcome ac11() {
  const auto rm = random_model({6, 6, 6}, {1, 1, 1}, 31);
  const ForwardModel& m = rm.model;
  std::mt19937_64 rng(37);
  std::normal_distribution<double> gauss;
  std::vector<double> data(m.data_size());
  for (auto& v : data) v = gauss(rng);
  SolverConfig sc;
  sc.alpha = 4.0;
  sc.boundary_margin = 1;
  const Problem prob(m, data, sc, 0.3);
  std::vector<double> x(m.image_size()), g(m.image_size()), dir(m.image_size()), xp, xm;
  for (auto& v : x) v = gauss(rng);
  prob.gradient(x, g);
  double worst = 0.0;
  const double h = 1e-3;
  for (int t = 0; t < 10; ++t) {
    for (auto& v : dir) v = gauss(rng);
    xp = x;
    xm = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
      xp[i] += h * dir[i];
      xm[i] -= h * dir[i];
    }
    const double fd = (prob.objective(xp).total - prob.objective(xm).total) / (2.0 * h);
    double an = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) an += g[i] * dir[i];
    worst = std::max(worst, std::abs(fd - an) / std::max(std::abs(an), 1e-300));
  }
  return {worst < kAc11Gradient,
          fmt("8^3 problem, 10 directions: max rel gradient vs central difference %.1e (limit %.0e)", worst,
              kAc11Gradient)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> all = {
      {"AC1", ac1}, {"AC2", ac2}, {"AC3", ac3}, {"AC4", ac4},   {"AC5", ac5},  {"AC6", ac6},
      {"AC7", ac7}, {"AC8", ac8}, {"AC9", ac9}, {"AC10", ac10}, {"AC11", ac11}};
  std::set<std::string> only(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& [name, fn] : all) {
    if (!only.empty() && !only.count(name)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%-5s %s  %s  [%.1f s]\n", name.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
