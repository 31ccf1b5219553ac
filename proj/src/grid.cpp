#include "mh3d/grid.hpp"

#include <algorithm>
#include <cmath>

namespace mh3d {

std::string to_string(const Shape3& s) {
  return std::to_string(s.nx) + "x" + std::to_string(s.ny) + "x" + std::to_string(s.nz);
}

Mesh Mesh::centered(Shape3 shape, Vec3 spacing) {
  Mesh m;
  m.shape = shape;
  m.spacing = spacing;
  for (int a = 0; a < 3; ++a) {
    m.origin[a] = -0.5 * static_cast<double>(shape[a] - 1) * spacing[a];
  }
  return m;
}

void Mesh::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (shape[a] < 1) throw std::invalid_argument("mesh: every axis needs at least one sample");
    if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
      throw std::invalid_argument("mesh: spacing must be positive and finite");
    }
    if (!std::isfinite(origin[a])) throw std::invalid_argument("mesh: origin must be finite");
  }
}

Volume pad_image(const Volume& image, std::array<std::size_t, 3> pad) {
  const Shape3 in = image.shape();
  Shape3 out{in.nx + 2 * pad[0], in.ny + 2 * pad[1], in.nz + 2 * pad[2]};
  Volume result(out);
  for (std::size_t k = 0; k < in.nz; ++k) {
    for (std::size_t j = 0; j < in.ny; ++j) {
      const double* src = &image(0, j, k);
      std::copy(src, src + in.nx, &result(pad[0], j + pad[1], k + pad[2]));
    }
  }
  return result;
}

Volume crop_image(const Volume& image, std::array<std::size_t, 3> pad) {
  const Shape3 in = image.shape();
  if (in.nx < 2 * pad[0] + 1 || in.ny < 2 * pad[1] + 1 || in.nz < 2 * pad[2] + 1) {
    throw std::invalid_argument("crop_image: padding exceeds image extent");
  }
  Shape3 out{in.nx - 2 * pad[0], in.ny - 2 * pad[1], in.nz - 2 * pad[2]};
  Volume result(out);
  for (std::size_t k = 0; k < out.nz; ++k) {
    for (std::size_t j = 0; j < out.ny; ++j) {
      const double* src = &image(pad[0], j + pad[1], k + pad[2]);
      std::copy(src, src + out.nx, &result(0, j, k));
    }
  }
  return result;
}

Volume extract_plane(const Volume& v, std::size_t k) {
  const Shape3 s = v.shape();
  if (k >= s.nz) throw std::out_of_range("extract_plane: plane index");
  Volume plane(Shape3{s.nx, s.ny, 1});
  std::copy(&v(0, 0, k), &v(0, 0, k) + s.nx * s.ny, plane.data());
  return plane;
}

double l2_norm(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

double l2_norm(const std::vector<cdouble>& v) {
  double acc = 0.0;
  for (const auto& x : v) acc += std::norm(x);
  return std::sqrt(acc);
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

std::size_t next_smooth_size(std::size_t n) {
  if (n <= 1) return 1;
  for (std::size_t m = n;; ++m) {
    std::size_t r = m;
    for (std::size_t p : {2u, 3u, 5u, 7u}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return m;
  }
}

}  // namespace mh3d
