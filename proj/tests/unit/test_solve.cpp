#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "doctest.h"
#include "mh3d/solve.hpp"

using namespace mh3d;

namespace {

Volume random_volume(Shape3 s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Volume v(s);
  for (auto& x : v) x = g(rng);
  return v;
}

// Two-harmonic model with smooth random kernels on a 6x5x8 field of view.
struct Small {
  std::vector<std::array<Volume, 3>> kernels;
  ForwardModel model;

  explicit Small(std::array<std::size_t, 3> pad = {1, 1, 1}) {
    for (std::uint64_t h = 0; h < 2; ++h) {
      std::array<Volume, 3> per;
      per[2] = random_volume({3, 3, 3}, 40 + h);
      kernels.push_back(per);
    }
    ForwardGeometry g;
    g.fine_mesh = Mesh::centered({6, 5, 8}, {2e-3, 2e-3, 1e-3});
    for (std::size_t k = 0; k < 8; k += 2) g.slab_z.push_back(g.fine_mesh.axis_coord(2, k));
    g.pad = pad;
    g.smooth_sizes = false;
    model = build_forward_model({2, 3}, kernels, Sensitivity{}, g);
  }

  std::vector<double> data_of(const Volume& fov_rho) const {
    return apply_forward(model, model.embed(fov_rho));
  }
};

Volume blob(Shape3 s) {
  Volume v(s);
  v(2, 2, 3) = 1.0;
  v(3, 2, 4) = 0.5;
  return v;
}

// Dense symmetric positive definite solve by Cholesky.
std::vector<double> spd_solve(std::vector<double> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    REQUIRE(d > 0.0);
    a[j * n + j] = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / a[j * n + j];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) b[i] -= a[i * n + k] * b[k];
    b[i] /= a[i * n + i];
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t k = i + 1; k < n; ++k) b[i] -= a[k * n + i] * b[k];
    b[i] /= a[i * n + i];
  }
  return b;
}

}  // namespace

TEST_CASE("solve: Laplacian annihilates constants and interior ramps") {
  const Shape3 s{6, 5, 7};
  CHECK(max_abs(apply_tikhonov(Volume(s, 3.5)).values()) < 1e-12);
  Volume ramp(s);
  for (std::size_t k = 0; k < s.nz; ++k) {
    for (std::size_t j = 0; j < s.ny; ++j) {
      for (std::size_t i = 0; i < s.nx; ++i) ramp(i, j, k) = 0.5 * i - 2.0 * j + 1.5 * k;
    }
  }
  const Volume t = apply_tikhonov(ramp);
  for (std::size_t k = 1; k + 1 < s.nz; ++k) {
    for (std::size_t j = 1; j + 1 < s.ny; ++j) {
      for (std::size_t i = 1; i + 1 < s.nx; ++i) CHECK(std::abs(t(i, j, k)) < 1e-12);
    }
  }
  CHECK(apply_tikhonov(ramp, 0).values() == ramp.values());
  CHECK_THROWS_AS(apply_tikhonov(ramp, 1), std::invalid_argument);
}

TEST_CASE("solve: spectral and stencil normal operators agree") {
  const Volume r = random_volume({6, 5, 7}, 3);
  const Volume a = tikhonov_normal_stencil(r);
  const Volume b = tikhonov_normal_spectral(r);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-10 * max_abs(a.values()));
  CHECK(tikhonov_normal_spectral(r, 0).values() == r.values());
  // Largest eigenvalue of the squared periodic Laplacian is bounded by 12^2.
  Volume check(Shape3{4, 4, 4});
  for (std::size_t k = 0; k < 4; ++k) {
    for (std::size_t j = 0; j < 4; ++j) {
      for (std::size_t i = 0; i < 4; ++i) check(i, j, k) = ((i + j + k) % 2) ? 1.0 : -1.0;
    }
  }
  const Volume top = tikhonov_normal_stencil(check);
  CHECK(top[0] == doctest::Approx(tikhonov_normal_bound(2) * check[0]));
}

TEST_CASE("solve: boundary selector counts") {
  CHECK(boundary_selector({4, 4, 4}, 1).size() == 56);
  CHECK(boundary_selector({4, 4, 4}, 2).size() == 64);
  CHECK(boundary_selector({5, 6, 7}, 10).size() == 210);
  const auto sel = boundary_selector({7, 6, 5}, 2);
  const std::set<std::size_t> unique(sel.begin(), sel.end());
  CHECK(unique.size() == sel.size());
  CHECK(sel.size() + 3 * 2 * 1 == 210);  // the interior is 3 x 2 x 1
  CHECK_THROWS_AS(boundary_selector({4, 4, 4}, 0), std::invalid_argument);
}

TEST_CASE("solve: gradient matches finite differences of the objective") {
  const Small s;
  const auto data = s.data_of(blob(s.model.fov_shape()));
  SolverConfig cfg;
  cfg.alpha = 2.0;
  const Problem p(s.model, data, cfg, 0.3);
  std::vector<double> rho = random_volume(s.model.padded_shape(), 9).values();
  std::vector<double> grad(rho.size());
  p.gradient(rho, grad);
  const double h = 1e-5;
  for (std::size_t i : {0ul, 17ul, 100ul, rho.size() - 1}) {
    auto up = rho, dn = rho;
    up[i] += h;
    dn[i] -= h;
    const double fd = (p.objective(up).total - p.objective(dn).total) / (2 * h);
    CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("solve: unconstrained solution matches the dense normal equations") {
  const Small s;
  const auto data = s.data_of(blob(s.model.fov_shape()));
  SolverConfig cfg;
  cfg.nonneg = false;
  cfg.lambda = 0.05;
  cfg.lambda_scale = LambdaScale::absolute;
  cfg.tikhonov_order = 0;
  cfg.alpha = 0.0;
  cfg.harmonic_weighting = HarmonicWeighting::none;
  cfg.tolerance = 0.0;
  cfg.max_iterations = 20000;
  const auto r = reconstruct(data, s.model, cfg);

  const std::size_t n = s.model.image_size(), m = s.model.data_size();
  const auto a = build_dense_oracle(s.model, s.kernels, Sensitivity{});
  std::vector<double> normal(n * n, 0.0), rhs(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t row = 0; row < m; ++row) acc += a[row * n + i] * a[row * n + j];
      normal[i * n + j] = acc;
    }
    normal[i * n + i] += cfg.lambda;
    for (std::size_t row = 0; row < m; ++row) rhs[i] += a[row * n + i] * data[row];
  }
  const auto exact = spd_solve(normal, rhs);
  double err = 0.0;
  for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(r.rho_padded[i] - exact[i]));
  CHECK(err < 1e-6 * max_abs(exact));
}

TEST_CASE("solve: zero data and overwhelming regularisation give a zero image") {
  const Small s;
  const auto zero = reconstruct(std::vector<double>(s.model.data_size(), 0.0), s.model, SolverConfig{});
  CHECK(max_abs(zero.rho.values()) == 0.0);
  CHECK(zero.trace.stop_reason == "zero data");

  const auto data = s.data_of(blob(s.model.fov_shape()));
  SolverConfig weak, strong;
  weak.lambda = 1e-6;
  strong.lambda = 1e6;
  const double a = max_abs(reconstruct(data, s.model, weak).rho.values());
  const double b = max_abs(reconstruct(data, s.model, strong).rho.values());
  CHECK(b < 1e-4 * a);
}

TEST_CASE("solve: runs are deterministic, non-negative and decrease the objective") {
  const Small s;
  const auto data = s.data_of(blob(s.model.fov_shape()));
  SolverConfig cfg;
  cfg.lambda = 1e-4;
  cfg.max_iterations = 200;
  const auto a = reconstruct(data, s.model, cfg);
  const auto b = reconstruct(data, s.model, cfg);
  CHECK(a.rho.values() == b.rho.values());
  CHECK(*std::min_element(a.rho.begin(), a.rho.end()) >= 0.0);
  REQUIRE(a.trace.objective.size() == a.trace.iterations);
  CHECK(a.trace.objective.front().total > a.trace.objective.back().total);
  CHECK(a.trace.iteration_seconds.size() == a.trace.iterations);
  const std::string csv = a.trace.to_csv();
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(a.trace.iterations + 1));

  // The strongest source is recovered in place.
  const auto& rho = a.rho.values();
  const auto peak = std::max_element(rho.begin(), rho.end()) - rho.begin();
  CHECK(peak == static_cast<long>(blob(s.model.fov_shape()).offset(2, 2, 3)));
}

TEST_CASE("solve: an oversized fixed step diverges with a trace") {
  const Small s;
  const auto data = s.data_of(blob(s.model.fov_shape()));
  SolverConfig cfg;
  cfg.fixed_step = 1e3;
  cfg.nonneg = false;
  cfg.tolerance = 0.0;
  cfg.max_iterations = 5000;
  try {
    reconstruct(data, s.model, cfg);
    FAIL("expected SolverDivergence");
  } catch (const SolverDivergence& e) {
    CHECK(e.trace().stop_reason == "non-finite objective");
    CHECK(e.trace().iterations > 0);
  }
}

TEST_CASE("solve: sign ambiguity is resolved per harmonic") {
  const Small s;
  auto data = s.data_of(blob(s.model.fov_shape()));
  const auto clean = data;
  const std::size_t block = data.size() / 2;
  for (std::size_t i = block; i < data.size(); ++i) data[i] = -data[i];
  CHECK(resolve_sign_ambiguity(s.model, data) == std::vector<int>{1, -1});
  CHECK(data == clean);
  CHECK(resolve_sign_ambiguity(s.model, data) == std::vector<int>{1, 1});
}

TEST_CASE("solve: configuration checks") {
  const Small s;
  const std::vector<double> data(s.model.data_size(), 1.0);
  SolverConfig cfg;
  cfg.lambda = -1.0;
  CHECK_THROWS_AS(reconstruct(data, s.model, cfg), std::invalid_argument);
  cfg = SolverConfig{};
  cfg.max_iterations = 0;
  CHECK_THROWS_AS(reconstruct(data, s.model, cfg), std::invalid_argument);
  CHECK_THROWS_AS(reconstruct(std::vector<double>(3, 1.0), s.model, SolverConfig{}), std::invalid_argument);
  auto bad = data;
  bad[0] = NAN;
  CHECK_THROWS_AS(reconstruct(bad, s.model, SolverConfig{}), std::invalid_argument);
}
