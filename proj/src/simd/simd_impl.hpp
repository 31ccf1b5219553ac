#pragma once

#include <cstddef>

// Per-ISA kernel declarations. Kept free of standard-library includes so the
// AVX2 translation unit cannot emit shared inline code built for AVX2.

#define MH3D_DECLARE_KERNELS(ns)                                                        \
  namespace mh3d::simd::ns {                                                            \
  void cmul(const double* a, const double* b, double* out, std::size_t n);              \
  void cmul_acc(const double* a, const double* b, double* out, std::size_t n);          \
  void cmulc_acc(const double* a, const double* b, double* out, std::size_t n);         \
  void hadamard(const double* a, const double* b, double* out, std::size_t n);          \
  void hadamard_acc(const double* a, const double* b, double* out, std::size_t n);      \
  void axpy(double alpha, const double* x, double* y, std::size_t n);                   \
  void extrapolate(const double* x, const double* x_prev, double beta, double* out,     \
                   std::size_t n);                                                      \
  void projected_step(const double* y, const double* g, double tau, bool nonneg,        \
                      double* out, std::size_t n);                                      \
  double dot(const double* a, const double* b, std::size_t n);                          \
  double sum_squares(const double* a, std::size_t n);                                   \
  }

MH3D_DECLARE_KERNELS(scalar)
#if defined(__x86_64__) || defined(_M_X64)
#define MH3D_HAVE_AVX2_KERNELS 1
MH3D_DECLARE_KERNELS(avx2)
#endif
