// Reference kernels. Complex values are interleaved (re, im) pairs and `n`
// counts complex elements for the c* kernels.

#include <algorithm>
#include <cstddef>

#include "simd_impl.hpp"

namespace mh3d::simd::scalar {

void cmul(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double ar = a[2 * i], ai = a[2 * i + 1];
    const double br = b[2 * i], bi = b[2 * i + 1];
    out[2 * i] = ar * br - ai * bi;
    out[2 * i + 1] = ar * bi + ai * br;
  }
}

void cmul_acc(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double ar = a[2 * i], ai = a[2 * i + 1];
    const double br = b[2 * i], bi = b[2 * i + 1];
    out[2 * i] += ar * br - ai * bi;
    out[2 * i + 1] += ar * bi + ai * br;
  }
}

void cmulc_acc(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double ar = a[2 * i], ai = a[2 * i + 1];
    const double br = b[2 * i], bi = b[2 * i + 1];
    out[2 * i] += ar * br + ai * bi;
    out[2 * i + 1] += ar * bi - ai * br;
  }
}

void hadamard(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void hadamard_acc(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] += a[i] * b[i];
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void extrapolate(const double* x, const double* x_prev, double beta, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + beta * (x[i] - x_prev[i]);
}

void projected_step(const double* y, const double* g, double tau, bool nonneg, double* out,
                    std::size_t n) {
  if (nonneg) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::max(y[i] - tau * g[i], 0.0);
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = y[i] - tau * g[i];
  }
}

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_squares(const double* a, std::size_t n) { return dot(a, a, n); }

}  // namespace mh3d::simd::scalar
