#pragma once

// Multi-harmonic anti-differentiation: closed-form recovery of the native
// image along the drive axis. Harmonic k is modelled per z-column as
// d_k = c_k f^{k-1} * rho_N with f the circulant central difference.

#include <cstddef>
#include <string>
#include <vector>

#include "mh3d/grid.hpp"
#include "mh3d/portrait.hpp"

namespace mh3d {

/// Spectrum of f^order for the stencil f = [0, -1, 0, ..., 0, 1] of the
/// given length: (2 i sin(2 pi q / N))^order.
std::vector<cdouble> derivative_kernel(std::size_t length, int order);

struct MhadConfig {
  double lambda = 0.0;
  std::vector<int> harmonics{2, 3, 4, 5};
  double gamma_a = 1.0;
  /// Fine-mesh z spacing the portraits are meant to resolve; a warning is
  /// raised when the slab spacing exceeds twice this value.
  double fine_dz = 1e-3;

  void validate() const;
};

struct MhadResult {
  Volume native;
  /// Frequency bins with a zero denominator (DC, and Nyquist for even N);
  /// the output there is set to 0.
  std::size_t null_bins = 0;
  std::vector<std::string> warnings;
};

/// rho_N = IDFT[ conj(f) d2 / (|f|^2 + lambda) ] along z for every (x, y).
MhadResult mhad_second(const Volume& d2, double lambda);

/// rho_N = IDFT[ sum_k c_k^{-1} conj(f^{k-1}) d_k / (sum_k |f^{k-1}|^2 + lambda) ].
/// `portraits[h]` holds harmonic cfg.harmonics[h] (real, phase corrected).
MhadResult mhad_multi(const std::vector<Volume>& portraits, const MhadConfig& cfg);
/// Stack variant; uses the real part of each harmonic listed in cfg.
MhadResult mhad_multi(const PortraitStack& stack, const MhadConfig& cfg);

/// Builds d_k = c_k f^{k-1} * rho_N along z (circulant), the exact forward
/// counterpart of mhad_multi.
std::vector<Volume> mhad_synthesize(const Volume& native, const MhadConfig& cfg);

}  // namespace mh3d
