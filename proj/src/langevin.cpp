#include "mh3d/langevin.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace mh3d {
namespace {

// Closed forms. With c = coth(x) and u = csch^2(x) = c^2 - 1 every derivative
// of coth is A_k(u) + c * B_k(u). From dc/dx = -u and du/dx = -2cu:
//   A_{k+1} = -u B_k - 2u(1 + u) B_k'
//   B_{k+1} = -2u A_k'
// The tables are generated at compile time starting from coth = 0 + c * 1.
constexpr int kPolyLen = kMaxLangevinOrder + 2;
using Poly = std::array<double, kPolyLen>;

struct CothDerivative {
  Poly a{};
  Poly b{};
};

constexpr Poly derivative(const Poly& p) {
  Poly d{};
  for (int i = 1; i < kPolyLen; ++i) d[i - 1] = p[i] * i;
  return d;
}

constexpr std::array<CothDerivative, kMaxLangevinOrder + 1> make_coth_table() {
  std::array<CothDerivative, kMaxLangevinOrder + 1> t{};
  t[0].b[0] = 1.0;
  for (int k = 0; k < kMaxLangevinOrder; ++k) {
    const Poly da = derivative(t[k].a);
    const Poly db = derivative(t[k].b);
    CothDerivative next{};
    for (int i = 0; i + 1 < kPolyLen; ++i) {
      // -u B - 2u B' - 2u^2 B'
      next.a[i + 1] += -t[k].b[i] - 2.0 * db[i];
      if (i + 2 < kPolyLen) next.a[i + 2] += -2.0 * db[i];
      next.b[i + 1] += -2.0 * da[i];
    }
    t[k + 1] = next;
  }
  return t;
}

constexpr auto kCoth = make_coth_table();

static_assert(kCoth[1].a[1] == -1.0 && kCoth[1].b[0] == 0.0, "d/dx coth = -csch^2");
static_assert(kCoth[2].b[1] == 2.0 && kCoth[2].a[1] == 0.0, "d2/dx2 coth = 2 coth csch^2");

template <class T>
T horner(const Poly& p, T u) {
  T acc{0.0};
  for (int i = kPolyLen - 1; i >= 0; --i) acc = acc * u + p[i];
  return acc;
}

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

template <class T>
T closed_form(T x, int k) {
  // coth and csch^2 through exp(-2|x|) so large |x| cannot overflow.
  const bool pos = std::real(x) >= 0.0;
  const T e = std::exp(pos ? T(-2.0) * x : T(2.0) * x);
  const T c = (pos ? T(1.0) : T(-1.0)) * (T(1.0) + e) / (T(1.0) - e);
  const T u = T(4.0) * e / ((T(1.0) - e) * (T(1.0) - e));
  const auto& poly = kCoth[k];
  const T coth_k = horner(poly.a, u) + c * horner(poly.b, u);
  // d^k/dx^k (1/x) = (-1)^k k! / x^{k+1}
  const double sign = (k % 2 == 0) ? 1.0 : -1.0;
  return coth_k - sign * factorial(k) / std::pow(x, k + 1);
}

// Series. L(x) = sum_{n>=1} a_n x^{2n-1} with a_n = (-1)^{n+1} 2 zeta(2n) / pi^{2n},
// radius of convergence pi (poles of coth at i*pi*n).
constexpr int kSeriesTerms = 160;

double zeta_even(int n) {
  const double two_n = 2.0 * n;
  if (n == 1) return std::numbers::pi * std::numbers::pi / 6.0;
  if (n == 2) return std::pow(std::numbers::pi, 4) / 90.0;
  constexpr int kTerms = 2000;
  double sum = 0.0;
  for (int j = kTerms; j >= 1; --j) sum += std::pow(static_cast<double>(j), -two_n);
  // Euler-Maclaurin tail beyond kTerms.
  const double J = kTerms;
  sum += std::pow(J, 1.0 - two_n) / (two_n - 1.0) - 0.5 * std::pow(J, -two_n);
  return sum;
}

struct SeriesTable {
  // coef[k][n] multiplies x^{2n+1-k} (n counted from 0).
  std::array<std::array<double, kSeriesTerms>, kMaxLangevinOrder + 1> coef{};
};

const SeriesTable& series_table() {
  static const SeriesTable table = [] {
    SeriesTable t;
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double pi_pow = 1.0;
    for (int n = 1; n <= kSeriesTerms; ++n) {
      pi_pow *= pi2;
      const double a = ((n % 2 == 1) ? 2.0 : -2.0) * zeta_even(n) / pi_pow;
      const int power = 2 * n - 1;
      for (int k = 0; k <= kMaxLangevinOrder; ++k) {
        double falling = 1.0;
        for (int j = 0; j < k; ++j) falling *= (power - j);
        t.coef[k][n - 1] = (power >= k) ? a * falling : 0.0;
      }
    }
    return t;
  }();
  return table;
}

template <class T>
T series(T x, int k) {
  const auto& coef = series_table().coef[k];
  // first n with 2n + 1 >= k
  const int n0 = k / 2;
  T x2 = x * x;
  T term_pow = std::pow(x, 2 * n0 + 1 - k);
  T sum{0.0};
  int small = 0;
  for (int n = n0; n < kSeriesTerms; ++n) {
    const T term = coef[n] * term_pow;
    sum += term;
    if (std::abs(term) <= 1e-18 * std::abs(sum)) {
      if (++small == 3) break;
    } else {
      small = 0;
    }
    term_pow *= x2;
  }
  return sum;
}

void check_order(int k) {
  if (k < 0 || k > kMaxLangevinOrder) {
    throw std::out_of_range("langevin_derivative: order " + std::to_string(k) +
                            " outside [0, " + std::to_string(kMaxLangevinOrder) + "]");
  }
}

}  // namespace

double langevin(double x) { return langevin_derivative(x, 0); }

double langevin_derivative(double x, int k) {
  check_order(k);
  if (std::abs(x) < kLangevinSeriesRadius) return series(x, k);
  return closed_form(x, k);
}

std::complex<double> langevin_derivative(std::complex<double> z, int k) {
  check_order(k);
  if (std::abs(z) < kLangevinSeriesRadius) return series(z, k);
  return closed_form(z, k);
}

double langevin_derivative_series(double x, int k) {
  check_order(k);
  return series(x, k);
}

double langevin_derivative_closed(double x, int k) {
  check_order(k);
  if (x == 0.0) throw std::domain_error("langevin_derivative_closed: singular at 0");
  return closed_form(x, k);
}

LangevinPair langevin_pair(double x) {
  // The closed form loses about one digit to cancellation at 0.5; the series
  // needs about a dozen terms there.
  const double ax = std::abs(x);
  if (ax < 0.5) return {series(x, 0), series(x, 1)};
  if (ax > 40.0) {
    // coth = sign(x) and csch^2 underflows to 0 to double precision
    const double s = x > 0.0 ? 1.0 : -1.0;
    return {s - 1.0 / x, 1.0 / (x * x)};
  }
  const double e = std::exp(-2.0 * ax);
  const double c = (1.0 + e) / (1.0 - e) * (x > 0.0 ? 1.0 : -1.0);
  const double u = 4.0 * e / ((1.0 - e) * (1.0 - e));
  return {c - 1.0 / x, 1.0 / (x * x) - u};
}

}  // namespace mh3d
