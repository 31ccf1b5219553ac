#pragma once

#include <complex>

namespace mh3d {

/// Highest derivative order served by langevin_derivative.
inline constexpr int kMaxLangevinOrder = 12;

/// |x| below which the power series is used instead of the coth/csch closed form.
inline constexpr double kLangevinSeriesRadius = 2.0;

/// L(x) = coth(x) - 1/x, continuous at 0.
double langevin(double x);

/// k-th derivative of L; k = 0 returns L itself. Throws std::out_of_range for
/// k outside [0, kMaxLangevinOrder].
double langevin_derivative(double x, int k);
std::complex<double> langevin_derivative(std::complex<double> z, int k);

/// Branch-forced evaluations, exposed for the branch-agreement tests.
double langevin_derivative_series(double x, int k);
double langevin_derivative_closed(double x, int k);

/// L(x) and L'(x) in one pass (shared exponentials).
struct LangevinPair {
  double value;
  double slope;
};
LangevinPair langevin_pair(double x);

}  // namespace mh3d
