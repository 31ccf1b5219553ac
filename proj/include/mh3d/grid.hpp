#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mh3d {

using cdouble = std::complex<double>;
using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

struct Index3 {
  std::ptrdiff_t x = 0, y = 0, z = 0;
  friend bool operator==(const Index3&, const Index3&) = default;
};

struct Shape3 {
  std::size_t nx = 1, ny = 1, nz = 1;

  std::size_t size() const { return nx * ny * nz; }
  std::size_t operator[](int axis) const { return axis == 0 ? nx : axis == 1 ? ny : nz; }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

std::string to_string(const Shape3& s);

/// Regular 3D sampling grid. Voxel (i, j, k) sits at origin + (i*dx, j*dy, k*dz).
struct Mesh {
  Shape3 shape;
  Vec3 spacing{1.0, 1.0, 1.0};
  Vec3 origin{0.0, 0.0, 0.0};

  Vec3 position(std::size_t i, std::size_t j, std::size_t k) const {
    return {origin[0] + spacing[0] * static_cast<double>(i),
            origin[1] + spacing[1] * static_cast<double>(j),
            origin[2] + spacing[2] * static_cast<double>(k)};
  }
  double axis_coord(int axis, std::size_t i) const {
    return origin[axis] + spacing[axis] * static_cast<double>(i);
  }
  double voxel_volume() const { return spacing[0] * spacing[1] * spacing[2]; }

  /// Mesh with `n[axis]` samples per axis, centered on the origin.
  static Mesh centered(Shape3 shape, Vec3 spacing);

  void validate() const;
};

/// Dense 3D array, x fastest then y then z.
template <class T>
class Grid3 {
 public:
  Grid3() = default;
  explicit Grid3(Shape3 shape, T fill = T{}) : shape_(shape), data_(shape.size(), fill) {}

  const Shape3& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t offset(std::size_t i, std::size_t j, std::size_t k) const {
    return i + shape_.nx * (j + shape_.ny * k);
  }
  T& operator()(std::size_t i, std::size_t j, std::size_t k) { return data_[offset(i, j, k)]; }
  const T& operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[offset(i, j, k)];
  }
  T& operator[](std::size_t n) { return data_[n]; }
  const T& operator[](std::size_t n) const { return data_[n]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

 private:
  Shape3 shape_;
  std::vector<T> data_;
};

using Volume = Grid3<double>;
using CVolume = Grid3<cdouble>;

inline void require_same_shape(const Shape3& a, const Shape3& b, const char* what) {
  if (!(a == b)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + to_string(a) + " vs " +
                                to_string(b));
  }
}

/// Zero-pad by `pad[axis]` voxels on both sides of each axis.
Volume pad_image(const Volume& image, std::array<std::size_t, 3> pad);
/// Inverse of pad_image.
Volume crop_image(const Volume& image, std::array<std::size_t, 3> pad);

/// Copy of the z-plane `k` as an nx*ny*1 volume.
Volume extract_plane(const Volume& v, std::size_t k);

double l2_norm(const std::vector<double>& v);
double l2_norm(const std::vector<cdouble>& v);
double max_abs(const std::vector<double>& v);

/// Smallest n' >= n whose prime factors are all in {2, 3, 5, 7}.
std::size_t next_smooth_size(std::size_t n);

}  // namespace mh3d
