#include "mh3d/fft.hpp"

#include <fftw3.h>

#include <cstdlib>
#include <map>
#include <mutex>
#include <new>
#include <stdexcept>
#include <thread>
#include <utility>

namespace mh3d::fft {
namespace {

// FFTW's planner is not thread-safe.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

void init_threads_locked() {
  static bool done = false;
  if (done) return;
  done = true;
  fftw_init_threads();
  fftw_plan_with_nthreads(thread_budget());
}

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const noexcept {
    if (p != nullptr) {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(p);
    }
  }
};
using PlanPtr = std::unique_ptr<fftw_plan_s, PlanDeleter>;

fftw_complex* as_fftw(cdouble* p) { return reinterpret_cast<fftw_complex*>(p); }
fftw_complex* as_fftw(const cdouble* p) {
  return reinterpret_cast<fftw_complex*>(const_cast<cdouble*>(p));
}

// 1D complex plans are cached per (length, sign, in-place) and executed on
// arbitrary (unaligned) user buffers.
fftw_plan plan_1d(std::size_t n, int sign, bool in_place) {
  static std::map<std::tuple<std::size_t, int, bool>, PlanPtr> cache;
  std::lock_guard lock(planner_mutex());
  init_threads_locked();
  auto key = std::make_tuple(n, sign, in_place);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second.get();
  auto* a = fftw_alloc_complex(n);
  auto* b = in_place ? a : fftw_alloc_complex(n);
  fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), a, b, sign,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!in_place) fftw_free(b);
  fftw_free(a);
  if (p == nullptr) throw std::runtime_error("fft: failed to create 1D plan");
  cache.emplace(key, PlanPtr(p));
  return p;
}

}  // namespace

void* aligned_alloc_bytes(std::size_t bytes) {
  void* p = fftw_malloc(bytes == 0 ? 1 : bytes);
  if (p == nullptr) throw std::bad_alloc();
  return p;
}

void aligned_free(void* p) noexcept { fftw_free(p); }

int thread_budget() {
  static const int budget = [] {
    if (const char* env = std::getenv("MH3D_THREADS")) {
      const int n = std::atoi(env);
      if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
  }();
  return budget;
}

void dft(std::span<const cdouble> in, std::span<cdouble> out, int sign) {
  if (in.size() != out.size()) throw std::invalid_argument("fft::dft: length mismatch");
  if (in.empty()) return;
  const bool in_place = in.data() == out.data();
  fftw_plan p = plan_1d(in.size(), sign, in_place);
  fftw_execute_dft(p, as_fftw(in.data()), as_fftw(out.data()));
}

std::vector<cdouble> forward(std::span<const cdouble> in) {
  std::vector<cdouble> out(in.size());
  dft(in, out, FFTW_FORWARD);
  return out;
}

std::vector<cdouble> inverse(std::span<const cdouble> in) {
  std::vector<cdouble> out(in.size());
  dft(in, out, FFTW_BACKWARD);
  const double scale = in.empty() ? 1.0 : 1.0 / static_cast<double>(in.size());
  for (auto& v : out) v *= scale;
  return out;
}

struct Real3D::Plans {
  PlanPtr r2c;
  PlanPtr c2r;
};

Real3D::Real3D(Shape3 shape) : shape_(shape), plans_(std::make_unique<Plans>()) {
  if (shape.size() == 0) throw std::invalid_argument("fft::Real3D: empty shape");
  AlignedVector<double> real(real_size());
  AlignedVector<cdouble> spec(spectrum_size());
  const int n0 = static_cast<int>(shape.nz);
  const int n1 = static_cast<int>(shape.ny);
  const int n2 = static_cast<int>(shape.nx);
  std::lock_guard lock(planner_mutex());
  init_threads_locked();
  plans_->r2c.reset(fftw_plan_dft_r2c_3d(n0, n1, n2, real.data(), as_fftw(spec.data()),
                                         FFTW_ESTIMATE | FFTW_PRESERVE_INPUT));
  plans_->c2r.reset(
      fftw_plan_dft_c2r_3d(n0, n1, n2, as_fftw(spec.data()), real.data(), FFTW_ESTIMATE));
  if (!plans_->r2c || !plans_->c2r) throw std::runtime_error("fft: failed to create 3D plans");
}

Real3D::~Real3D() = default;

void Real3D::forward(const double* in, cdouble* out) const {
  fftw_execute_dft_r2c(plans_->r2c.get(), const_cast<double*>(in), as_fftw(out));
}

void Real3D::inverse(cdouble* in, double* out) const {
  fftw_execute_dft_c2r(plans_->c2r.get(), as_fftw(in), out);
}

}  // namespace mh3d::fft
