#pragma once

// Data-parallel inner loops of the reconstruction pipeline.
//
// Every kernel has a portable scalar reference and, on x86-64, an AVX2
// variant. The variant is picked once at startup from CPUID; MH3D_SIMD=scalar
// in the environment forces the reference path. Elementwise kernels of both
// variants are bit-identical (no FMA contraction); reductions differ only in
// summation order.

#include <complex>
#include <cstddef>
#include <span>
#include <string_view>

namespace mh3d::simd {

using cdouble = std::complex<double>;

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);
/// Best instruction set supported by the running CPU.
Isa detected_isa();
/// Instruction set currently used by the dispatching entry points.
Isa active_isa();
/// Override the dispatch (tests, benchmarking). Throws if `isa` is unsupported.
void set_active_isa(Isa isa);

// out = a * b
void cmul(std::span<const cdouble> a, std::span<const cdouble> b, std::span<cdouble> out);
// out += a * b
void cmul_acc(std::span<const cdouble> a, std::span<const cdouble> b, std::span<cdouble> out);
// out += conj(a) * b
void cmulc_acc(std::span<const cdouble> a, std::span<const cdouble> b, std::span<cdouble> out);
// out = a .* b
void hadamard(std::span<const double> a, std::span<const double> b, std::span<double> out);
// out += a .* b
void hadamard_acc(std::span<const double> a, std::span<const double> b, std::span<double> out);
// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
// out = x + beta * (x - x_prev)
void extrapolate(std::span<const double> x, std::span<const double> x_prev, double beta,
                 std::span<double> out);
// out = y - tau * g, clamped at zero when `nonneg`
void projected_step(std::span<const double> y, std::span<const double> g, double tau, bool nonneg,
                    std::span<double> out);
double dot(std::span<const double> a, std::span<const double> b);
double sum_squares(std::span<const double> a);

// Raw per-ISA entry points; used by the equivalence tests.
struct KernelTable {
  void (*cmul)(const double*, const double*, double*, std::size_t);
  void (*cmul_acc)(const double*, const double*, double*, std::size_t);
  void (*cmulc_acc)(const double*, const double*, double*, std::size_t);
  void (*hadamard)(const double*, const double*, double*, std::size_t);
  void (*hadamard_acc)(const double*, const double*, double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*extrapolate)(const double*, const double*, double, double*, std::size_t);
  void (*projected_step)(const double*, const double*, double, bool, double*, std::size_t);
  double (*dot)(const double*, const double*, std::size_t);
  double (*sum_squares)(const double*, std::size_t);
};

const KernelTable& kernels_for(Isa isa);

}  // namespace mh3d::simd
