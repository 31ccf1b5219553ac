#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "mh3d/simd.hpp"
#include "simd_impl.hpp"

namespace mh3d::simd {
namespace {

#define MH3D_TABLE(ns)                                                                   \
  KernelTable {                                                                          \
    &ns::cmul, &ns::cmul_acc, &ns::cmulc_acc, &ns::hadamard, &ns::hadamard_acc,          \
        &ns::axpy, &ns::extrapolate, &ns::projected_step, &ns::dot, &ns::sum_squares     \
  }

const KernelTable kScalar = MH3D_TABLE(scalar);
#if defined(MH3D_HAVE_AVX2_KERNELS)
const KernelTable kAvx2 = MH3D_TABLE(avx2);
#endif

bool cpu_has_avx2() {
#if defined(MH3D_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Isa initial_isa() {
  if (const char* env = std::getenv("MH3D_SIMD")) {
    if (std::string(env) == "scalar") return Isa::scalar;
  }
  return detected_isa();
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

const KernelTable& table() { return kernels_for(current().load(std::memory_order_relaxed)); }

void check(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string("simd::") + what + ": length mismatch");
}

const double* re(std::span<const cdouble> s) { return reinterpret_cast<const double*>(s.data()); }
double* re(std::span<cdouble> s) { return reinterpret_cast<double*>(s.data()); }

}  // namespace

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

Isa detected_isa() {
  static const Isa isa = cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
  return isa;
}

Isa active_isa() { return current().load(); }

void set_active_isa(Isa isa) {
  if (isa == Isa::avx2 && detected_isa() != Isa::avx2) {
    throw std::runtime_error("simd: AVX2 not supported on this CPU");
  }
  current().store(isa);
}

const KernelTable& kernels_for(Isa isa) {
#if defined(MH3D_HAVE_AVX2_KERNELS)
  if (isa == Isa::avx2) return kAvx2;
#endif
  (void)isa;
  return kScalar;
}

void cmul(std::span<const cdouble> a, std::span<const cdouble> b, std::span<cdouble> out) {
  check(a.size(), b.size(), "cmul");
  check(a.size(), out.size(), "cmul");
  table().cmul(re(a), re(b), re(out), a.size());
}

void cmul_acc(std::span<const cdouble> a, std::span<const cdouble> b, std::span<cdouble> out) {
  check(a.size(), b.size(), "cmul_acc");
  check(a.size(), out.size(), "cmul_acc");
  table().cmul_acc(re(a), re(b), re(out), a.size());
}

void cmulc_acc(std::span<const cdouble> a, std::span<const cdouble> b, std::span<cdouble> out) {
  check(a.size(), b.size(), "cmulc_acc");
  check(a.size(), out.size(), "cmulc_acc");
  table().cmulc_acc(re(a), re(b), re(out), a.size());
}

void hadamard(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  check(a.size(), b.size(), "hadamard");
  check(a.size(), out.size(), "hadamard");
  table().hadamard(a.data(), b.data(), out.data(), a.size());
}

void hadamard_acc(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  check(a.size(), b.size(), "hadamard_acc");
  check(a.size(), out.size(), "hadamard_acc");
  table().hadamard_acc(a.data(), b.data(), out.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  check(x.size(), y.size(), "axpy");
  table().axpy(alpha, x.data(), y.data(), x.size());
}

void extrapolate(std::span<const double> x, std::span<const double> x_prev, double beta,
                 std::span<double> out) {
  check(x.size(), x_prev.size(), "extrapolate");
  check(x.size(), out.size(), "extrapolate");
  table().extrapolate(x.data(), x_prev.data(), beta, out.data(), x.size());
}

void projected_step(std::span<const double> y, std::span<const double> g, double tau, bool nonneg,
                    std::span<double> out) {
  check(y.size(), g.size(), "projected_step");
  check(y.size(), out.size(), "projected_step");
  table().projected_step(y.data(), g.data(), tau, nonneg, out.data(), y.size());
}

double dot(std::span<const double> a, std::span<const double> b) {
  check(a.size(), b.size(), "dot");
  return table().dot(a.data(), b.data(), a.size());
}

double sum_squares(std::span<const double> a) { return table().sum_squares(a.data(), a.size()); }

}  // namespace mh3d::simd
