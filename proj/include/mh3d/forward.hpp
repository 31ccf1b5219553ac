#pragma once

// Linear portrait model A = P H B.
//
//   B  per-component receive sensitivity (diagonal),
//   H  per-harmonic circular convolution with the PSF kernels on the padded
//      fine mesh, summed over receive components,
//   P  keeps the measured slab planes and crops x/y to the field of view.
//
// The image lives on the padded mesh. Data are ordered harmonic, slab, y, x.

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "mh3d/fft.hpp"
#include "mh3d/grid.hpp"
#include "mh3d/psfgen.hpp"

namespace mh3d {

struct Sensitivity {
  /// Uniform b1 used where no map is given.
  Vec3 uniform{0.0, 0.0, 1.0};
  /// Optional per-component maps on the field-of-view mesh; extended into the
  /// padding by edge replication.
  std::array<Volume, 3> maps;
};

struct ForwardGeometry {
  Mesh fine_mesh;              // reconstruction field of view
  std::vector<double> slab_z;  // measured slab planes (m)
  std::array<std::size_t, 3> pad{0, 0, 0};
  /// Grow the padded extents to 2-3-5-7-smooth sizes (extra voxels on the high side).
  bool smooth_sizes = true;
};

class ForwardModel {
 public:
  const std::vector<int>& harmonics() const { return harmonics_; }
  const Shape3& padded_shape() const { return padded_; }
  const Shape3& fov_shape() const { return fov_; }
  const std::array<std::size_t, 3>& offset() const { return offset_; }
  const Mesh& fine_mesh() const { return fine_mesh_; }
  const Mesh& padded_mesh() const { return padded_mesh_; }
  const std::vector<std::size_t>& slab_selector() const { return slab_selector_; }
  const std::vector<double>& snap_distance() const { return snap_distance_; }
  std::size_t image_size() const { return padded_.size(); }
  std::size_t plane_size() const { return fov_.nx * fov_.ny; }
  std::size_t data_size() const {
    return harmonics_.size() * slab_selector_.size() * plane_size();
  }
  bool component_active(int c) const { return active_[c]; }
  /// Sum of squared kernel values of harmonic h over active components.
  double kernel_energy(std::size_t h) const { return kernel_energy_.at(h); }

  /// Zero-extend a field-of-view image onto the padded mesh, and back.
  Volume embed(const Volume& fov) const;
  Volume crop(const Volume& padded) const;

  /// Reentrant; `rho` has image_size() entries, `data` data_size().
  void forward(std::span<const double> rho, std::span<double> data) const;
  void adjoint(std::span<const double> data, std::span<double> rho) const;

 private:
  friend ForwardModel build_forward_model(const PsfStack&, const Sensitivity&,
                                          const ForwardGeometry&);
  friend ForwardModel build_forward_model(const std::vector<int>&,
                                          const std::vector<std::array<Volume, 3>>&,
                                          const Sensitivity&, const ForwardGeometry&);

  using Spectrum = fft::AlignedVector<cdouble>;

  std::vector<int> harmonics_;
  Shape3 padded_, fov_;
  std::array<std::size_t, 3> offset_{};
  Mesh fine_mesh_, padded_mesh_;
  std::vector<std::size_t> slab_selector_;
  std::vector<double> snap_distance_;
  std::array<bool, 3> active_{};
  std::array<double, 3> uniform_{};
  std::vector<double> kernel_energy_;
  std::array<Volume, 3> maps_;               // on the padded mesh; empty when uniform
  std::vector<std::array<Spectrum, 3>> spectra_;  // kernel spectra, pre-scaled by 1/N
  std::shared_ptr<const fft::Real3D> fft_;
};

/// Reconstruction mesh for a portrait stack: the portrait x/y pixels, and
/// z from the first to the last slab plane in steps of `fine_dz`.
Mesh reconstruction_mesh(const Mesh& portraits, double fine_dz);

/// Kernels in `psfs` must share the fine-mesh spacing. Throws when a slab
/// plane lies more than half a voxel from the nearest fine-mesh plane.
ForwardModel build_forward_model(const PsfStack& psfs, const Sensitivity& sensitivity,
                                 const ForwardGeometry& geometry);

/// Same, from bare centred kernels (used for stencil operators and tests).
ForwardModel build_forward_model(const std::vector<int>& harmonics,
                                 const std::vector<std::array<Volume, 3>>& kernels,
                                 const Sensitivity& sensitivity, const ForwardGeometry& geometry);

/// Kernel half-extent per axis (the padding that removes wrap-around).
std::array<std::size_t, 3> kernel_half_support(const PsfStack& psfs);

std::vector<double> apply_forward(const ForwardModel& model, const Volume& rho);
Volume apply_adjoint(const ForwardModel& model, const std::vector<double>& data);

/// Dense matrix of the model, row-major (data_size rows, image_size
/// columns), assembled by direct circular summation over the kernel taps
/// rather than through the FFT path.
std::vector<double> build_dense_oracle(const ForwardModel& model,
                                       const std::vector<std::array<Volume, 3>>& kernels,
                                       const Sensitivity& sensitivity,
                                       std::size_t max_voxels = 4096);
std::vector<double> dense_apply(const std::vector<double>& dense, std::size_t rows,
                                std::span<const double> x);
std::vector<double> dense_apply_transpose(const std::vector<double>& dense, std::size_t cols,
                                          std::span<const double> y);

/// Largest |<A x, y> - <x, A^T y>| / (||A x|| ||y||) over seeded Gaussian pairs.
double adjoint_mismatch(const ForwardModel& model, std::size_t pairs, std::uint64_t seed);

}  // namespace mh3d
