#pragma once

// Scanner geometry, field-free-point trajectory and the particle response
// tensor.
//
// Units are SI throughout: metres, seconds, tesla. The gradient matrix maps a
// position to the static field (T/m). The drive is a real sine along z with
// amplitude B_ex, so the FFP oscillates with excursion A = B_ex / G_zz.

#include <cstddef>
#include <vector>

#include "mh3d/grid.hpp"

namespace mh3d {

/// Serpentine focus-field raster: lines along x, stepping in y.
///
/// Lines sit on the portrait pixel rows. The FFP moves one pixel every
/// `periods_per_pixel` drive periods, both along a line and during the y step
/// between lines, so per-period samples fall on a fixed sub-pixel lattice.
struct RasterSpec {
  double pixel_spacing = 2e-3;  // m, in x and y
  int periods_per_pixel = 4;
};

struct ScannerConfig {
  Mat3 gradient{};                 // T/m
  double drive_frequency = 25e3;   // f0, Hz
  double drive_amplitude = 2e-3;   // B_ex, T
  double beta = 1000.0;            // 1/T
  double sample_rate = 800e3;      // Hz
  double magnetic_moment = 1.0;    // A m^2 (scales the signal only)
  std::vector<double> z_slabs;     // m, strictly increasing, equal spacing
  Vec3 fov{64e-3, 64e-3, 40e-3};   // m, raster covers [-fov/2, fov/2] in x and y
  RasterSpec raster;
  int max_harmonic = 8;            // highest harmonic the sampling must resolve

  /// A = B_ex / G_zz.
  double excursion() const;
  /// gamma = beta * G_zz, the position-to-Langevin-argument scale on the drive axis.
  double gamma() const;
  /// gamma * A.
  double gamma_a() const { return gamma() * excursion(); }
  /// Focus-field velocity magnitudes (vx along lines, vy during steps), m/s.
  Vec3 shift_rate() const;
  int samples_per_period() const;
  double slab_spacing() const;

  /// Throws std::invalid_argument naming the first violated constraint.
  void validate() const;
};

/// Reference scanner: G = 0.554 T/m * diag(1/2, 1/2, 1). The drive frequency,
/// amplitude, beta and raster are not given by the source geometry and are
/// illustrative defaults.
ScannerConfig reference_preset();

/// Discretised raster timing for one slab. All times are whole drive periods.
struct RasterTiming {
  std::size_t pixels_x = 0;     // samples along a line
  std::size_t lines = 0;        // rows in y
  std::size_t scan_periods = 0; // periods until the FFP reaches the raster end
  std::size_t periods = 0;      // acquisition length, scan_periods rounded up to a smooth size
  std::size_t samples = 0;      // periods * samples_per_period
  double duration = 0.0;        // s
};

RasterTiming raster_timing(const ScannerConfig& cfg);

/// Portrait mesh for one slab stack: raster pixels in x and y, slab planes in z.
Mesh portrait_mesh(const ScannerConfig& cfg);

/// Focus-field (x, y) position at time t; the FFP parks at the raster end
/// once the scan is complete.
Vec3 focus_position(double t, const ScannerConfig& cfg);
Vec3 focus_velocity(double t, const ScannerConfig& cfg);

/// FFP position: raster (x, y) at slab height plus A sin(2 pi f0 t) along z.
Vec3 ffp_position(double t, const ScannerConfig& cfg, std::size_t slab_index);
/// Analytic time derivative of ffp_position.
Vec3 ffp_velocity(double t, const ScannerConfig& cfg, std::size_t slab_index);

/// Below this field magnitude (T) psf_tensor returns its limit at the origin.
inline constexpr double kPsfSingularField = 1e-9;

/// Jacobian of the normalised magnetisation L(beta |Gx|) Gx / |Gx| with
/// respect to position (1/m):
///   h(x) = [beta L'(beta s) u u^T + L(beta s) / s (I - u u^T)] G,
/// with s = |Gx| and u = Gx / s. This is the tensor with H_sat = 1/beta.
/// At s < kPsfSingularField the limit (beta / 3) G is returned.
Mat3 psf_tensor(const Vec3& offset, const Mat3& gradient, double beta);
Mat3 psf_tensor(const Vec3& offset, const ScannerConfig& cfg);

/// Normalised magnetisation L(beta |Gx|) Gx / |Gx| (unitless).
Vec3 magnetisation(const Vec3& offset, const Mat3& gradient, double beta);

Vec3 mat_vec(const Mat3& m, const Vec3& v);
double dot3(const Vec3& a, const Vec3& b);

}  // namespace mh3d
