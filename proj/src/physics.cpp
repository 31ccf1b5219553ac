#include "mh3d/physics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "mh3d/langevin.hpp"

namespace mh3d {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("scanner config: " + what);
}

std::size_t pixel_count(double extent, double spacing) {
  return static_cast<std::size_t>(std::llround(extent / spacing)) + 1;
}

// Raster coordinates in pixel units at time t: (x, y, dx/du, dy/du) where u
// is pixels travelled.
struct RasterPoint {
  double x, y, vx, vy;
};

struct RasterDims {
  std::size_t pixels_x, lines;
};

RasterDims raster_dims(const ScannerConfig& cfg) {
  return {pixel_count(cfg.fov[0], cfg.raster.pixel_spacing),
          pixel_count(cfg.fov[1], cfg.raster.pixel_spacing)};
}

RasterPoint raster_point(double t, const ScannerConfig& cfg) {
  const RasterDims tm = raster_dims(cfg);
  const double line_len = static_cast<double>(tm.pixels_x - 1);
  const double cycle = line_len + 1.0;
  const double u = std::max(0.0, t) * cfg.drive_frequency / cfg.raster.periods_per_pixel;
  const double last = static_cast<double>(tm.lines - 1);
  const double end_x = (tm.lines % 2 == 1) ? line_len : 0.0;

  const double j = std::floor(u / cycle);
  if (j > last || (j == last && u - j * cycle >= line_len)) return {end_x, last, 0.0, 0.0};
  const double r = u - j * cycle;
  const bool forward = static_cast<long long>(j) % 2 == 0;
  if (r < line_len) {
    return forward ? RasterPoint{r, j, 1.0, 0.0} : RasterPoint{line_len - r, j, -1.0, 0.0};
  }
  return {forward ? line_len : 0.0, j + (r - line_len), 0.0, 1.0};
}

}  // namespace

double ScannerConfig::excursion() const { return drive_amplitude / gradient[2][2]; }

double ScannerConfig::gamma() const { return beta * gradient[2][2]; }

Vec3 ScannerConfig::shift_rate() const {
  const double v = raster.pixel_spacing * drive_frequency / raster.periods_per_pixel;
  return {v, v, 0.0};
}

int ScannerConfig::samples_per_period() const {
  return static_cast<int>(std::llround(sample_rate / drive_frequency));
}

double ScannerConfig::slab_spacing() const {
  return z_slabs.size() < 2 ? 0.0 : z_slabs[1] - z_slabs[0];
}

void ScannerConfig::validate() const {
  for (const auto& row : gradient) {
    for (double g : row) require(std::isfinite(g), "gradient entries must be finite");
  }
  require(gradient[2][2] > 0.0, "gradient[2][2] (drive axis) must be positive");
  require(drive_frequency > 0.0, "drive_frequency must be positive");
  require(drive_amplitude >= 0.0, "drive_amplitude must be non-negative");
  require(beta > 0.0, "beta must be positive");
  require(magnetic_moment > 0.0, "magnetic_moment must be positive");
  require(max_harmonic >= 1, "max_harmonic must be at least 1");
  require(sample_rate > 2.0 * max_harmonic * drive_frequency,
          "sample_rate must exceed 2 * max_harmonic * drive_frequency");
  const double spp = sample_rate / drive_frequency;
  require(std::abs(spp - std::round(spp)) < 1e-9 * spp,
          "sample_rate must be an integer multiple of drive_frequency");
  require(raster.pixel_spacing > 0.0, "raster.pixel_spacing must be positive");
  require(raster.periods_per_pixel >= 1, "raster.periods_per_pixel must be at least 1");
  for (int a = 0; a < 2; ++a) {
    require(fov[a] >= 0.0, "fov must be non-negative");
    const double n = fov[a] / raster.pixel_spacing;
    require(std::abs(n - std::round(n)) < 1e-6, "fov x/y must be a multiple of pixel_spacing");
  }
  require(!z_slabs.empty(), "z_slabs must not be empty");
  if (z_slabs.size() > 1) {
    const double dz = slab_spacing();
    require(dz > 0.0, "z_slabs must be strictly increasing");
    for (std::size_t j = 1; j < z_slabs.size(); ++j) {
      const double step = z_slabs[j] - z_slabs[j - 1];
      require(step > 0.0, "z_slabs must be strictly increasing");
      require(std::abs(step - dz) <= 1e-9 + 1e-6 * dz, "z_slabs must be equally spaced");
    }
    require(dz < 2.0 * excursion(), "slab spacing must be below twice the drive excursion");
  }
}

ScannerConfig reference_preset() {
  ScannerConfig cfg;
  const double g0 = 0.554;
  cfg.gradient = {{{0.5 * g0, 0.0, 0.0}, {0.0, 0.5 * g0, 0.0}, {0.0, 0.0, g0}}};
  for (int j = -4; j <= 4; ++j) cfg.z_slabs.push_back(5e-3 * j);
  return cfg;
}

RasterTiming raster_timing(const ScannerConfig& cfg) {
  RasterTiming t;
  const RasterDims d = raster_dims(cfg);
  t.pixels_x = d.pixels_x;
  t.lines = d.lines;
  const std::size_t ppp = static_cast<std::size_t>(cfg.raster.periods_per_pixel);
  const std::size_t pixels_travelled = t.lines * (t.pixels_x - 1) + (t.lines - 1);
  t.scan_periods = pixels_travelled * ppp;
  // One extra period so the final pixel is sampled, then round up for the FFT.
  t.periods = next_smooth_size(t.scan_periods + 1);
  t.samples = t.periods * static_cast<std::size_t>(cfg.samples_per_period());
  t.duration = static_cast<double>(t.periods) / cfg.drive_frequency;
  return t;
}

Mesh portrait_mesh(const ScannerConfig& cfg) {
  const RasterTiming t = raster_timing(cfg);
  Mesh m;
  m.shape = {t.pixels_x, t.lines, cfg.z_slabs.size()};
  const double dz = cfg.z_slabs.size() > 1 ? cfg.slab_spacing() : 1.0;
  m.spacing = {cfg.raster.pixel_spacing, cfg.raster.pixel_spacing, dz};
  m.origin = {-0.5 * (t.pixels_x - 1) * cfg.raster.pixel_spacing,
              -0.5 * (t.lines - 1) * cfg.raster.pixel_spacing, cfg.z_slabs.front()};
  return m;
}

Vec3 focus_position(double t, const ScannerConfig& cfg) {
  const RasterDims tm = raster_dims(cfg);
  const RasterPoint p = raster_point(t, cfg);
  const double px = cfg.raster.pixel_spacing;
  return {(p.x - 0.5 * (tm.pixels_x - 1)) * px, (p.y - 0.5 * (tm.lines - 1)) * px, 0.0};
}

Vec3 focus_velocity(double t, const ScannerConfig& cfg) {
  const RasterPoint p = raster_point(t, cfg);
  const Vec3 v = cfg.shift_rate();
  return {p.vx * v[0], p.vy * v[1], 0.0};
}

Vec3 ffp_position(double t, const ScannerConfig& cfg, std::size_t slab_index) {
  if (slab_index >= cfg.z_slabs.size()) throw std::out_of_range("ffp_position: slab index");
  Vec3 p = focus_position(t, cfg);
  p[2] = cfg.z_slabs[slab_index] + cfg.excursion() * std::sin(kTwoPi * cfg.drive_frequency * t);
  return p;
}

Vec3 ffp_velocity(double t, const ScannerConfig& cfg, std::size_t slab_index) {
  if (slab_index >= cfg.z_slabs.size()) throw std::out_of_range("ffp_velocity: slab index");
  Vec3 v = focus_velocity(t, cfg);
  const double w = kTwoPi * cfg.drive_frequency;
  v[2] = cfg.excursion() * w * std::cos(w * t);
  return v;
}

Vec3 mat_vec(const Mat3& m, const Vec3& v) {
  return {m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
          m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
          m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2]};
}

double dot3(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Mat3 psf_tensor(const Vec3& offset, const Mat3& gradient, double beta) {
  const Vec3 w = mat_vec(gradient, offset);
  const double s = std::sqrt(dot3(w, w));
  Mat3 h{};
  if (s < kPsfSingularField) {
    // beta L'(0) = L(beta s) / s at s -> 0 = beta / 3
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) h[i][j] = beta / 3.0 * gradient[i][j];
    }
    return h;
  }
  const LangevinPair lp = langevin_pair(beta * s);
  const double radial = beta * lp.slope;
  const double tangential = lp.value / s;
  const Vec3 u{w[0] / s, w[1] / s, w[2] / s};
  Mat3 j{};
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      const double uu = u[a] * u[b];
      j[a][b] = radial * uu + tangential * ((a == b ? 1.0 : 0.0) - uu);
    }
  }
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      h[a][b] = j[a][0] * gradient[0][b] + j[a][1] * gradient[1][b] + j[a][2] * gradient[2][b];
    }
  }
  return h;
}

Mat3 psf_tensor(const Vec3& offset, const ScannerConfig& cfg) {
  return psf_tensor(offset, cfg.gradient, cfg.beta);
}

Vec3 magnetisation(const Vec3& offset, const Mat3& gradient, double beta) {
  const Vec3 w = mat_vec(gradient, offset);
  const double s = std::sqrt(dot3(w, w));
  if (s < kPsfSingularField) {
    return {beta / 3.0 * w[0], beta / 3.0 * w[1], beta / 3.0 * w[2]};
  }
  const double l = langevin_pair(beta * s).value / s;
  return {l * w[0], l * w[1], l * w[2]};
}

}  // namespace mh3d
