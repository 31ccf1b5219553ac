#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "mh3d/grid.hpp"
#include "mh3d/physics.hpp"

namespace mh3d {

struct PointSource {
  Vec3 position{};
  double weight = 0.0;
};

struct VoxelPhantom {
  Mesh mesh;
  Volume density;
};

/// Particle distribution. Point sources and a voxel grid may be combined.
struct Phantom {
  std::vector<PointSource> points;
  std::optional<VoxelPhantom> voxels;
  /// Uniform receive-coil sensitivity b1 (unitless).
  Vec3 sensitivity{0.0, 0.0, 1.0};

  void validate() const;
};

struct TimeSignal {
  std::vector<double> samples;
  double sample_rate = 1.0;
  std::size_t slab_index = 0;

  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

/// s0(t) = m sum_n rho_n v(t)^T h(xi(t) - x_n) b1, sampled at n / sample_rate
/// over the slab acquisition. Voxels contribute with weight density * dV.
TimeSignal simulate_signal(const Phantom& phantom, const ScannerConfig& cfg,
                           std::size_t slab_index);

/// One signal per entry of cfg.z_slabs, computed in parallel.
std::vector<TimeSignal> simulate_all_slabs(const Phantom& phantom, const ScannerConfig& cfg);

/// Adds i.i.d. N(0, noise_std^2) samples drawn from a generator seeded with
/// `seed` (and the slab index, so slabs get independent streams).
TimeSignal add_noise(const TimeSignal& signal, double noise_std, std::uint64_t seed);

}  // namespace mh3d
