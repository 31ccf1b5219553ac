#pragma once

// Thin RAII layer over FFTW3. All transforms are unnormalized; callers fold
// the 1/N factor into whatever they multiply in the frequency domain.

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "mh3d/grid.hpp"

namespace mh3d::fft {

void* aligned_alloc_bytes(std::size_t bytes);
void aligned_free(void* p) noexcept;

template <class T>
struct AlignedAllocator {
  using value_type = T;
  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}
  T* allocate(std::size_t n) { return static_cast<T*>(aligned_alloc_bytes(n * sizeof(T))); }
  void deallocate(T* p, std::size_t) noexcept { aligned_free(p); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

template <class T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// Worker threads FFTW may use: MH3D_THREADS if set, else hardware concurrency.
int thread_budget();

/// In-place or out-of-place 1D complex DFT of length in.size(); sign -1 forward, +1 inverse.
void dft(std::span<const cdouble> in, std::span<cdouble> out, int sign);

std::vector<cdouble> forward(std::span<const cdouble> in);
/// Inverse DFT including the 1/N normalization.
std::vector<cdouble> inverse(std::span<const cdouble> in);

/// Real-to-complex 3D transform pair for a fixed shape (x fastest).
/// Spectrum layout: (nx/2 + 1) x ny x nz, x fastest.
class Real3D {
 public:
  explicit Real3D(Shape3 shape);
  ~Real3D();
  Real3D(const Real3D&) = delete;
  Real3D& operator=(const Real3D&) = delete;

  const Shape3& shape() const { return shape_; }
  std::size_t real_size() const { return shape_.size(); }
  std::size_t spectrum_size() const { return (shape_.nx / 2 + 1) * shape_.ny * shape_.nz; }

  /// `in` and `out` must come from AlignedVector storage. Input is preserved.
  void forward(const double* in, cdouble* out) const;
  /// Unnormalized inverse; destroys `in`.
  void inverse(cdouble* in, double* out) const;

  /// Index of the spectrum bin holding frequency (qx, qy, qz) with qx <= nx/2.
  std::size_t spectrum_index(std::size_t qx, std::size_t qy, std::size_t qz) const {
    return qx + (shape_.nx / 2 + 1) * (qy + shape_.ny * qz);
  }

 private:
  struct Plans;
  Shape3 shape_;
  std::unique_ptr<Plans> plans_;
};

}  // namespace mh3d::fft
