#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "mh3d/forward.hpp"

using namespace mh3d;

namespace {

std::vector<std::array<Volume, 3>> random_kernels(std::size_t harmonics, Shape3 s,
                                                  std::vector<int> comps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<std::array<Volume, 3>> out(harmonics);
  for (auto& per : out) {
    for (int c : comps) {
      per[c] = Volume(s);
      for (auto& v : per[c]) v = g(rng);
    }
  }
  return out;
}

// Fine mesh with 2 mm pixels and 1 mm planes; one slab every `step` planes.
ForwardGeometry geometry(Shape3 fov, std::size_t step, std::array<std::size_t, 3> pad) {
  ForwardGeometry g;
  g.fine_mesh = Mesh::centered(fov, {2e-3, 2e-3, 1e-3});
  for (std::size_t k = 0; k < fov.nz; k += step) g.slab_z.push_back(g.fine_mesh.axis_coord(2, k));
  g.pad = pad;
  g.smooth_sizes = false;
  return g;
}

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

}  // namespace

TEST_CASE("forward: zero in, zero out") {
  const auto kern = random_kernels(2, {3, 3, 3}, {2}, 1);
  const ForwardModel m = build_forward_model({2, 3}, kern, Sensitivity{}, geometry({6, 5, 7}, 2, {1, 1, 1}));
  const auto d = apply_forward(m, Volume(m.padded_shape()));
  CHECK(max_abs(d) == 0.0);
  const Volume r = apply_adjoint(m, std::vector<double>(m.data_size(), 0.0));
  CHECK(max_abs(r.values()) == 0.0);
  CHECK_THROWS_AS(apply_forward(m, Volume({2, 2, 2})), std::invalid_argument);
  CHECK_THROWS_AS(apply_adjoint(m, std::vector<double>(3)), std::invalid_argument);
}

TEST_CASE("forward: an impulse reproduces the kernel on every plane") {
  const Shape3 fov{7, 6, 8};
  const auto kern = random_kernels(1, {3, 3, 5}, {2}, 7);
  const ForwardModel m = build_forward_model({2}, kern, Sensitivity{}, geometry(fov, 1, {1, 1, 2}));
  REQUIRE(m.padded_shape() == Shape3{9, 8, 12});
  Volume rho(m.padded_shape());
  const std::size_t ix = 3, iy = 2, iz = 4;  // FOV coordinates
  rho(ix + 1, iy + 1, iz + 2) = 1.0;
  const auto d = apply_forward(m, rho);
  const Volume& k = kern[0][2];
  for (std::size_t z = 0; z < fov.nz; ++z) {
    for (std::size_t y = 0; y < fov.ny; ++y) {
      for (std::size_t x = 0; x < fov.nx; ++x) {
        const auto dx = static_cast<std::ptrdiff_t>(x - ix) + 1;
        const auto dy = static_cast<std::ptrdiff_t>(y - iy) + 1;
        const auto dz = static_cast<std::ptrdiff_t>(z - iz) + 2;
        const bool inside = dx >= 0 && dx < 3 && dy >= 0 && dy < 3 && dz >= 0 && dz < 5;
        const double want = inside ? k(dx, dy, dz) : 0.0;
        CHECK(d[x + fov.nx * (y + fov.ny * z)] == doctest::Approx(want).scale(1.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("forward: slab selector follows the slab spacing") {
  const auto kern = random_kernels(1, {1, 1, 3}, {2}, 3);
  const ForwardModel m = build_forward_model({2}, kern, Sensitivity{}, geometry({3, 3, 21}, 5, {0, 0, 1}));
  CHECK(m.slab_selector() == std::vector<std::size_t>{0, 5, 10, 15, 20});
  const ForwardModel all = build_forward_model({2}, kern, Sensitivity{}, geometry({3, 3, 4}, 1, {0, 0, 0}));
  CHECK(all.slab_selector() == std::vector<std::size_t>{0, 1, 2, 3});

  ForwardGeometry g = geometry({3, 3, 21}, 5, {0, 0, 1});
  g.slab_z[1] += 0.3e-3;
  const ForwardModel snapped = build_forward_model({2}, kern, Sensitivity{}, g);
  CHECK(snapped.slab_selector()[1] == 5);
  CHECK(snapped.snap_distance()[1] == doctest::Approx(0.3e-3));

  g.slab_z[1] = 0.5;
  CHECK_THROWS_AS(build_forward_model({2}, kern, Sensitivity{}, g), std::invalid_argument);
  g = geometry({3, 3, 21}, 5, {0, 0, 1});
  std::swap(g.slab_z[0], g.slab_z[1]);
  CHECK_THROWS_AS(build_forward_model({2}, kern, Sensitivity{}, g), std::invalid_argument);
}

TEST_CASE("forward: selecting rows after the fact equals the internal selector") {
  const Shape3 fov{5, 4, 11};
  const auto kern = random_kernels(2, {3, 3, 5}, {2}, 11);
  const ForwardModel every = build_forward_model({2, 3}, kern, Sensitivity{}, geometry(fov, 1, {1, 1, 2}));
  const ForwardModel sparse = build_forward_model({2, 3}, kern, Sensitivity{}, geometry(fov, 5, {1, 1, 2}));
  const auto rho = random_vector(every.image_size(), 5);
  std::vector<double> full(every.data_size()), part(sparse.data_size());
  every.forward(rho, full);
  sparse.forward(rho, part);
  const std::size_t plane = fov.nx * fov.ny;
  std::size_t n = 0;
  for (std::size_t h = 0; h < 2; ++h) {
    for (std::size_t s : sparse.slab_selector()) {
      for (std::size_t p = 0; p < plane; ++p) {
        CHECK(part[n++] == full[(h * fov.nz + s) * plane + p]);
      }
    }
  }
}

TEST_CASE("forward: PSF spacing must match the fine mesh") {
  PsfStack psf;
  psf.harmonics = {2};
  psf.mesh = Mesh::centered({3, 3, 3}, {2e-3, 2e-3, 2e-3});
  psf.kernels = random_kernels(1, {3, 3, 3}, {2}, 1);
  psf.normalization = {{2, 1.0, 0.0, 0.0}};
  CHECK_THROWS_AS(build_forward_model(psf, Sensitivity{}, geometry({4, 4, 6}, 2, {1, 1, 1})),
                  std::invalid_argument);
  psf.mesh.spacing[2] = 1e-3;
  CHECK_NOTHROW(build_forward_model(psf, Sensitivity{}, geometry({4, 4, 6}, 2, {1, 1, 1})));
}

TEST_CASE("forward: adjoint and dense oracle agree with the matrix-free operator") {
  const Shape3 fov{5, 4, 6};
  const auto kern = random_kernels(2, {3, 3, 3}, {0, 1, 2}, 21);
  Sensitivity sens;
  sens.uniform = {0.5, -0.25, 1.0};
  sens.maps[1] = Volume(fov);
  for (auto& v : sens.maps[1]) v = 0.8;
  sens.maps[1](2, 1, 3) = 1.7;
  const ForwardModel m = build_forward_model({2, 4}, kern, sens, geometry(fov, 2, {1, 1, 1}));
  CHECK(adjoint_mismatch(m, 20, 3) < 1e-12);

  const auto dense = build_dense_oracle(m, kern, sens);
  REQUIRE(dense.size() == m.data_size() * m.image_size());
  const auto x = random_vector(m.image_size(), 8);
  const auto y = random_vector(m.data_size(), 9);
  std::vector<double> ax(m.data_size()), aty(m.image_size());
  m.forward(x, ax);
  m.adjoint(y, aty);
  const auto dx = dense_apply(dense, m.data_size(), x);
  const auto dy = dense_apply_transpose(dense, m.image_size(), y);
  for (std::size_t i = 0; i < ax.size(); ++i) CHECK(ax[i] == doctest::Approx(dx[i]).scale(max_abs(dx)).epsilon(1e-12));
  for (std::size_t i = 0; i < aty.size(); ++i) CHECK(aty[i] == doctest::Approx(dy[i]).scale(max_abs(dy)).epsilon(1e-12));

  CHECK_THROWS_AS(build_dense_oracle(m, kern, sens, 10), std::invalid_argument);
}

TEST_CASE("forward: smooth padded sizes and embed/crop") {
  const auto kern = random_kernels(1, {3, 3, 3}, {2}, 2);
  ForwardGeometry g = geometry({11, 7, 9}, 3, {1, 1, 1});
  g.smooth_sizes = true;
  const ForwardModel m = build_forward_model({2}, kern, Sensitivity{}, g);
  CHECK(m.padded_shape() == Shape3{14, 9, 12});  // 13 -> 14, 9, 11 -> 12
  Volume fov(m.fov_shape());
  for (std::size_t i = 0; i < fov.size(); ++i) fov[i] = static_cast<double>(i);
  CHECK(m.crop(m.embed(fov)).values() == fov.values());

  const std::array<std::size_t, 3> pad{2, 1, 3};
  CHECK(crop_image(pad_image(fov, pad), pad).values() == fov.values());
  const Volume zeros = pad_image(Volume({2, 2, 2}), pad);
  CHECK(zeros.shape() == Shape3{6, 4, 8});
  CHECK(max_abs(zeros.values()) == 0.0);
}
