#include <complex>
#include <cstring>
#include <random>
#include <vector>

#include "doctest.h"
#include "mh3d/simd.hpp"

using namespace mh3d::simd;

namespace {

std::vector<double> random_reals(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("simd: dispatch reports a usable instruction set") {
  const Isa active = active_isa();
  CHECK((active == Isa::scalar || active == Isa::avx2));
  if (detected_isa() == Isa::scalar) CHECK_THROWS(set_active_isa(Isa::avx2));
}

TEST_CASE("simd: elementwise kernels are bit-identical across instruction sets") {
  if (detected_isa() != Isa::avx2) return;
  const KernelTable& s = kernels_for(Isa::scalar);
  const KernelTable& v = kernels_for(Isa::avx2);
  // Odd lengths exercise the scalar tails of the vector loops.
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 64u, 1001u}) {
    CAPTURE(n);
    const auto a = random_reals(2 * n, 1);
    const auto b = random_reals(2 * n, 2);
    const auto base = random_reals(2 * n, 3);

    auto check_complex = [&](auto kernel_s, auto kernel_v) {
      auto o1 = base, o2 = base;
      kernel_s(a.data(), b.data(), o1.data(), n);
      kernel_v(a.data(), b.data(), o2.data(), n);
      CHECK(bit_equal(o1, o2));
    };
    check_complex(s.cmul, v.cmul);
    check_complex(s.cmul_acc, v.cmul_acc);
    check_complex(s.cmulc_acc, v.cmulc_acc);
    check_complex(s.hadamard, v.hadamard);
    check_complex(s.hadamard_acc, v.hadamard_acc);

    auto y1 = base, y2 = base;
    s.axpy(0.37, a.data(), y1.data(), 2 * n);
    v.axpy(0.37, a.data(), y2.data(), 2 * n);
    CHECK(bit_equal(y1, y2));

    auto e1 = base, e2 = base;
    s.extrapolate(a.data(), b.data(), 0.71, e1.data(), 2 * n);
    v.extrapolate(a.data(), b.data(), 0.71, e2.data(), 2 * n);
    CHECK(bit_equal(e1, e2));

    for (bool nonneg : {false, true}) {
      auto p1 = base, p2 = base;
      s.projected_step(a.data(), b.data(), 0.3, nonneg, p1.data(), 2 * n);
      v.projected_step(a.data(), b.data(), 0.3, nonneg, p2.data(), 2 * n);
      CHECK(bit_equal(p1, p2));
    }

    const double d1 = s.dot(a.data(), b.data(), 2 * n);
    const double d2 = v.dot(a.data(), b.data(), 2 * n);
    CHECK(d2 == doctest::Approx(d1).epsilon(1e-13).scale(1.0));
    const double q1 = s.sum_squares(a.data(), 2 * n);
    const double q2 = v.sum_squares(a.data(), 2 * n);
    CHECK(q2 == doctest::Approx(q1).epsilon(1e-13));
  }
}

TEST_CASE("simd: reference kernels compute the documented formulas") {
  using C = std::complex<double>;
  const std::vector<C> a{{1, 2}, {-3, 0.5}, {0, 1}};
  const std::vector<C> b{{4, -1}, {2, 2}, {0, 1}};
  std::vector<C> out(3, C(1, 1));
  cmul(a, b, out);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(out[i] - a[i] * b[i]) < 1e-15);
  std::vector<C> acc(3, C(1, 1));
  cmulc_acc(a, b, acc);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(acc[i] - (C(1, 1) + std::conj(a[i]) * b[i])) < 1e-15);

  const std::vector<double> y{1.0, -2.0, 0.5}, g{1.0, 1.0, -1.0};
  std::vector<double> step(3);
  projected_step(y, g, 2.0, true, step);
  CHECK(step == std::vector<double>{0.0, 0.0, 2.5});
  projected_step(y, g, 2.0, false, step);
  CHECK(step == std::vector<double>{-1.0, -4.0, 2.5});
  CHECK(dot(y, g) == doctest::Approx(-1.5));
  CHECK_THROWS_AS(dot(y, std::vector<double>{1.0}), std::invalid_argument);
}
