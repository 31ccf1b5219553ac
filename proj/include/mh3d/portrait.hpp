#pragma once

// Harmonic portraits: band-pass each harmonic of the received signal down to
// baseband, then grid one sample per drive period onto the focus-field
// raster.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mh3d/grid.hpp"
#include "mh3d/physics.hpp"
#include "mh3d/simulate.hpp"

namespace mh3d {

enum class WindowKind { hann, tophat };

/// Frequency window g applied around each harmonic. half_bandwidth = 0 means f0 / 2.
struct WindowSpec {
  WindowKind kind = WindowKind::hann;
  double half_bandwidth = 0.0;  // Hz

  double resolved_half_bandwidth(double f0) const;
  void validate(double f0) const;
};

WindowKind parse_window_kind(const std::string& name);
std::string to_string(WindowKind kind);

/// g(f) for a baseband offset f (Hz). Hann: cos^2(pi f / (2 B)); tophat: 1 for |f| <= B.
double window_response(const WindowSpec& w, double f0, double f);

struct BasebandSignal {
  std::vector<cdouble> samples;
  double sample_rate = 1.0;
  std::size_t slab_index = 0;
  int harmonic = 0;
};

/// s_k(t) = IDFT[ S(f + k f0) g(f) ]: the band around k f0 shifted to baseband.
/// A real tone a cos(2 pi k f0 t) yields the constant a / 2.
/// Throws if k f0 + B reaches Nyquist, if k < 2 (unless allow_fundamental),
/// or if k f0 does not fall on a DFT bin.
BasebandSignal harmonic_filter(const TimeSignal& signal, int k, const WindowSpec& window,
                               double f0, bool allow_fundamental = false);
/// Complex-input variant (no conjugate band).
std::vector<cdouble> harmonic_filter(std::span<const cdouble> samples, double sample_rate, int k,
                                     const WindowSpec& window, double f0,
                                     bool allow_fundamental = false);

enum class GridMethod { bilinear, nearest };

struct GridOptions {
  /// Sampling instant within each period, as a fraction of the period. 0 is
  /// the rising zero crossing of the drive (FFP at the slab plane).
  double sample_phase = 0.0;
  GridMethod method = GridMethod::bilinear;
};

struct Portrait2D {
  CVolume values;  // nx * ny * 1
  Volume weight;   // accumulated scatter weight; 0 marks an uncovered pixel
};

/// Samples the baseband signal once per drive period during the raster scan
/// and scatters it onto the (x, y) plane of `mesh` with weight normalisation.
Portrait2D grid_to_portrait(const BasebandSignal& filtered, const ScannerConfig& cfg,
                            const Mesh& mesh, const GridOptions& options = {});

struct PortraitStack {
  std::vector<int> harmonics;
  std::vector<CVolume> data;    // one nx * ny * n_slabs array per harmonic
  Volume mask;                  // 1 where covered, 0 otherwise
  Mesh mesh;                    // x, y pixels and slab planes
  WindowSpec window;
  std::vector<double> phases;   // rotation removed from each harmonic (rad)
  bool phase_corrected = false;

  std::size_t index_of(int k) const;  // throws if k is absent
  void validate() const;
};

/// Filter and grid every (harmonic, slab) pair.
PortraitStack form_portraits(const std::vector<TimeSignal>& signals, const ScannerConfig& cfg,
                             const std::vector<int>& harmonics, const WindowSpec& window,
                             const GridOptions& options = {});

/// Re-synthesise the band-limited time signal of every slab:
/// s(t) = sum_k 2 Re(d_k(xi(t)) e^{i 2 pi k f0 t}).
std::vector<TimeSignal> portrait_to_signal(const PortraitStack& stack, const ScannerConfig& cfg);

/// Indices of the `fraction` largest-magnitude voxels (at least one).
std::vector<std::size_t> top_magnitude_roi(const CVolume& portrait, double fraction = 0.01);

/// Constant phase of a portrait, modulo pi, in (-pi/2, pi/2]:
/// theta = arg(sum_roi d^2) / 2. Squaring makes portraits whose real
/// profile changes sign (odd harmonics of the z-derivative chain) add up
/// coherently; the remaining sign is resolved separately.
double estimate_phase(const CVolume& portrait, const std::vector<std::size_t>& roi);
double estimate_phase(const CVolume& portrait);

struct PhaseCorrection {
  Volume real;
  double imag_fraction = 0.0;  // |Im|^2 / |d|^2 after rotation
};

/// Re(e^{-i theta} d) together with the residual imaginary energy fraction.
PhaseCorrection apply_phase_correction(const CVolume& portrait, double theta);

/// Rotates every harmonic by -phases[h] and keeps the real part. Returns the
/// residual imaginary fractions.
std::vector<double> apply_phase_correction(PortraitStack& stack, const std::vector<double>& phases);

/// Per-harmonic estimate_phase with the default ROI.
std::vector<double> estimate_phases(const PortraitStack& stack);

/// Data vector in harmonic, slab, y, x order (real part of each portrait).
std::vector<double> stack_to_data(const PortraitStack& stack);
void data_to_stack(const std::vector<double>& data, PortraitStack& stack);

/// Sub-stack holding the listed harmonics, in the order given.
PortraitStack select_harmonics(const PortraitStack& stack, const std::vector<int>& harmonics);

}  // namespace mh3d
