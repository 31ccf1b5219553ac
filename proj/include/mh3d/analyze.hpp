#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mh3d/forward.hpp"
#include "mh3d/grid.hpp"

namespace mh3d {

/// Full width at half maximum (m) along `axis` through the strongest voxel
/// within `search_radius` of `hint`. Crossings are linearly interpolated.
/// Throws if the profile stays above half maximum up to the array edge.
double fwhm(const Volume& image, const Vec3& spacing, int axis, const Index3& hint,
            std::size_t search_radius = 2);

/// Mean image value at the peaks over the standard deviation on the background.
double snr_std(const Volume& image, const std::vector<std::size_t>& peaks,
               const std::vector<std::size_t>& background);
/// Largest value at the peaks over the largest background value.
double snr_peak(const Volume& image, const std::vector<std::size_t>& peaks,
                const std::vector<std::size_t>& background);

/// ||A rho - d|| / ||d|| with rho on the padded mesh.
double fit_error(const std::vector<double>& data, const ForwardModel& model, const Volume& rho);

struct PeakSearch {
  /// Peaks below this fraction of the global maximum are dropped.
  double threshold = 0.1;
  std::size_t max_peaks = 0;  // 0: no limit
  /// Optional inclusive search box; empty means the whole array.
  Index3 box_lo{0, 0, 0};
  Index3 box_hi{-1, -1, -1};
};

/// 3x3x3 local maxima (ties broken towards the lower index), strongest first.
std::vector<Index3> find_peaks(const Volume& image, const PeakSearch& search = {});

/// Linear index of a voxel.
std::size_t linear_index(const Shape3& shape, const Index3& p);

/// All voxels farther than `radius` (Chebyshev) from every peak.
std::vector<std::size_t> background_mask(const Shape3& shape, const std::vector<Index3>& peaks,
                                         std::size_t radius = 3);

struct SliceExport {
  double min = 0.0;
  double max = 0.0;
  std::vector<std::string> slices;
  std::vector<std::string> mips;  // along x, y, z
  std::string sidecar;
};

/// Writes every slice normal to `axis` and the three MIPs as 16-bit PGM
/// files named <prefix>_<axis><index>.pgm and <prefix>_mip<axis>.pgm, plus
/// <prefix>.json recording the min/max normalisation.
SliceExport export_slices(const Volume& image, int axis, const std::string& prefix);

struct GrayImage {
  std::size_t width = 0, height = 0;
  std::vector<std::uint16_t> pixels;  // row-major
};
GrayImage read_pgm(const std::string& path);
/// Undo the export normalisation.
std::vector<double> denormalize(const GrayImage& img, double min, double max);

}  // namespace mh3d
