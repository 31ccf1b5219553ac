#include "mh3d/simulate.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "mh3d/parallel.hpp"

namespace mh3d {
namespace {

std::vector<PointSource> flatten(const Phantom& phantom) {
  std::vector<PointSource> out;
  for (const auto& p : phantom.points) {
    if (p.weight != 0.0) out.push_back(p);
  }
  if (phantom.voxels) {
    const auto& vp = *phantom.voxels;
    const double dv = vp.mesh.voxel_volume();
    const Shape3 s = vp.mesh.shape;
    for (std::size_t k = 0; k < s.nz; ++k) {
      for (std::size_t j = 0; j < s.ny; ++j) {
        for (std::size_t i = 0; i < s.nx; ++i) {
          const double w = vp.density(i, j, k);
          if (w != 0.0) out.push_back({vp.mesh.position(i, j, k), w * dv});
        }
      }
    }
  }
  return out;
}

}  // namespace

void Phantom::validate() const {
  for (const auto& p : points) {
    if (!(p.weight >= 0.0) || !std::isfinite(p.weight)) {
      throw std::invalid_argument("phantom: point weights must be finite and non-negative");
    }
    for (double c : p.position) {
      if (!std::isfinite(c)) throw std::invalid_argument("phantom: point positions must be finite");
    }
  }
  if (voxels) {
    voxels->mesh.validate();
    require_same_shape(voxels->mesh.shape, voxels->density.shape(), "phantom voxels");
    for (double v : voxels->density) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument("phantom: voxel values must be finite and non-negative");
      }
    }
  }
  for (double b : sensitivity) {
    if (!std::isfinite(b)) throw std::invalid_argument("phantom: sensitivity must be finite");
  }
}

TimeSignal simulate_signal(const Phantom& phantom, const ScannerConfig& cfg,
                           std::size_t slab_index) {
  if (slab_index >= cfg.z_slabs.size()) throw std::out_of_range("simulate_signal: slab index");
  phantom.validate();
  const RasterTiming timing = raster_timing(cfg);
  TimeSignal out;
  out.sample_rate = cfg.sample_rate;
  out.slab_index = slab_index;
  out.samples.assign(timing.samples, 0.0);

  const std::vector<PointSource> sources = flatten(phantom);
  if (sources.empty()) return out;

  const Vec3& b1 = phantom.sensitivity;
  const double m = cfg.magnetic_moment;
  for (std::size_t n = 0; n < timing.samples; ++n) {
    const double t = static_cast<double>(n) / cfg.sample_rate;
    const Vec3 xi = ffp_position(t, cfg, slab_index);
    const Vec3 v = ffp_velocity(t, cfg, slab_index);
    double acc = 0.0;
    for (const auto& src : sources) {
      const Vec3 off{xi[0] - src.position[0], xi[1] - src.position[1], xi[2] - src.position[2]};
      const Mat3 h = psf_tensor(off, cfg);
      const Vec3 hb = mat_vec(h, b1);
      acc += src.weight * dot3(v, hb);
    }
    const double s = m * acc;
    if (!std::isfinite(s)) {
      throw std::runtime_error("simulate_signal: non-finite signal at sample " + std::to_string(n));
    }
    out.samples[n] = s;
  }
  return out;
}

std::vector<TimeSignal> simulate_all_slabs(const Phantom& phantom, const ScannerConfig& cfg) {
  std::vector<TimeSignal> out(cfg.z_slabs.size());
  parallel_for(out.size(), [&](std::size_t j) { out[j] = simulate_signal(phantom, cfg, j); });
  return out;
}

TimeSignal add_noise(const TimeSignal& signal, double noise_std, std::uint64_t seed) {
  if (!(noise_std >= 0.0)) throw std::invalid_argument("add_noise: noise_std must be >= 0");
  TimeSignal out = signal;
  if (noise_std == 0.0) return out;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(signal.slab_index)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> dist(0.0, noise_std);
  for (auto& s : out.samples) s += dist(rng);
  return out;
}

}  // namespace mh3d
