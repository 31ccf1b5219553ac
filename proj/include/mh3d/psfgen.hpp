#pragma once

#include <array>
#include <string>
#include <vector>

#include "mh3d/grid.hpp"
#include "mh3d/physics.hpp"
#include "mh3d/portrait.hpp"

namespace mh3d {

struct PsfNormalization {
  int harmonic = 0;
  /// Theoretical magnitude 2 pi m f0 (gamma A)^k / ((k-1)! 2^k) of the k-th
  /// harmonic for a sine drive (small gamma A). Kernels keep their simulated
  /// scale; this is a reference record.
  double prefactor = 0.0;
  /// Phase removed from the simulated portraits (rad).
  double phase = 0.0;
  /// Energy fraction discarded by kernel truncation.
  double tail_energy = 0.0;
};

/// Per-harmonic, per-receive-component kernels on a mesh centred on the origin.
struct PsfStack {
  std::vector<int> harmonics;
  Mesh mesh;  // generation mesh; kernels are odd-sized and centred on its centre voxel
  std::vector<std::array<Volume, 3>> kernels;  // [harmonic][x, y, z]; empty when inactive
  std::vector<PsfNormalization> normalization;
  std::vector<std::string> warnings;

  bool component_active(int c) const;
  const Volume& kernel(std::size_t h, int c) const { return kernels.at(h).at(c); }
  std::size_t index_of(int k) const;
  void validate() const;
};

struct PsfOptions {
  WindowSpec window;
  GridOptions grid;
  /// Receive components to build; a kernel is produced for each non-zero entry.
  Vec3 sensitivity{0.0, 0.0, 1.0};
  /// Kernels are cropped to the box where |kernel| > truncation * peak.
  double truncation = 1e-4;
  /// Make every (x, y) column sum to zero along z, so kernels annihilate
  /// constants along the drive axis. The correction sits on the outer z planes.
  bool zero_mean_columns = true;
  /// Extra raster pixels scanned on every x/y side and discarded, keeping the
  /// line turnarounds out of the kernel.
  std::size_t overscan = 4;
};

/// Point source at the origin, one slab per mesh z-plane, filtered, gridded
/// and phase-corrected. The mesh x/y spacing must equal the raster pixel.
PsfStack simulate_psf(const ScannerConfig& cfg, const std::vector<int>& harmonics,
                      const Mesh& mesh, const PsfOptions& options = {});

/// c_k = (gamma A)^k / (k - 1)!.
double harmonic_coefficient(int k, double gamma_a);

/// scaling * c_k * L^(k)(gamma z) at each z.
std::vector<double> analytic_psf_1d(int k, double gamma, double excursion, double scaling,
                                    const std::vector<double>& z);

/// c_k / (beta G_zz gamma^{k-1}) * d^{k-1}/dz^{k-1} h_zz(x, y, z), by nested
/// fourth-order central differences on a 5x refined z axis. On the z axis
/// this equals c_k L^(k)(gamma z).
Volume analytic_psf_3d(int k, const ScannerConfig& cfg, const Mesh& mesh);

/// Stack of analytic_psf_3d kernels (z component only).
PsfStack analytic_psf_stack(const ScannerConfig& cfg, const std::vector<int>& harmonics,
                            const Mesh& mesh);

/// ||sim - a ana||_2 / ||sim||_2 per harmonic with the optimal scalar a.
std::vector<double> compare_psf(const PsfStack& simulated, const PsfStack& analytic);

struct Theorem1Options {
  std::size_t periods = 4096;
  /// Range of gamma (t Delta - x0) covered by the linear shift.
  double span = 12.0;
  /// Central fraction of the record used for comparison.
  double interior = 0.8;
  /// Set false to hold the FFP still (Delta = 0) at gamma x0 = -offset.
  bool shift = true;
  double offset = 0.0;
};

struct Theorem1Row {
  double gamma_a = 0.0;
  int harmonic = 0;
  double relative_error = 0.0;
  double envelope_spread = 0.0;  // (max - min) |s_k| over the interior, relative to max
};

/// 1D complex-drive harness: xi(t) = A e^{i 2 pi f0 t} + t Delta. Compares
/// each harmonic envelope with i 2 pi m f0 (gamma A)^k / (k-1)! L^(k)(gamma(t Delta - x0)).
std::vector<Theorem1Row> verify_theorem1(const ScannerConfig& cfg,
                                         const std::vector<double>& gamma_a_list, int k_max,
                                         const Theorem1Options& options = {});

/// Partial sums of the Taylor expansion h(a + b) = sum_j h^(j)(a) b^j / j! of
/// the 1D kernel h(x) = gamma L'(gamma x), for j = 0..terms-1. Coefficients
/// come from a Cauchy integral on a circle inside the convergence disc.
std::vector<double> taylor_partial_sums(double gamma, double a, double b, int terms);

/// Convergence radius in b of the expansion above: sqrt(gamma^2 a^2 + pi^2) / gamma.
double taylor_radius(double gamma, double a);

/// Kernel generation mesh: raster pixels in x/y, `fine_dz` in z, centred on
/// the origin with `half_extent` voxels either side.
Mesh psf_mesh(const ScannerConfig& cfg, const std::array<std::size_t, 3>& half_extent,
              double fine_dz);

/// Sub-stack holding the listed harmonics, in the order given.
PsfStack select_harmonics(const PsfStack& stack, const std::vector<int>& harmonics);

}  // namespace mh3d
