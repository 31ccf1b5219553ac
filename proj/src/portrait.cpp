#include "mh3d/portrait.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "mh3d/fft.hpp"
#include "mh3d/parallel.hpp"

namespace mh3d {
namespace {

constexpr double kPi = std::numbers::pi;

// Frequency (Hz) of DFT bin q for length n.
double bin_frequency(std::size_t q, std::size_t n, double fs) {
  const double qq = q <= n / 2 ? static_cast<double>(q) : static_cast<double>(q) - n;
  return qq * fs / static_cast<double>(n);
}

std::size_t harmonic_bin(int k, double f0, std::size_t n, double fs) {
  const double b = k * f0 * static_cast<double>(n) / fs;
  const double r = std::round(b);
  if (std::abs(b - r) > 1e-6) {
    throw std::invalid_argument("harmonic_filter: k*f0 is not a DFT bin; use whole drive periods");
  }
  return static_cast<std::size_t>(r);
}

void check_harmonic(int k, double f0, double fs, double half_bw, bool allow_fundamental) {
  if (k < 1 || (k < 2 && !allow_fundamental)) {
    throw std::invalid_argument("harmonic_filter: harmonic " + std::to_string(k) +
                                " rejected (k >= 2 required)");
  }
  if (k * f0 + half_bw >= 0.5 * fs) {
    throw std::invalid_argument("harmonic_filter: harmonic " + std::to_string(k) +
                                " band exceeds Nyquist");
  }
}

std::vector<cdouble> filter_spectrum(const std::vector<cdouble>& spectrum, double fs, int k,
                                     const WindowSpec& window, double f0) {
  const std::size_t n = spectrum.size();
  const std::size_t kb = harmonic_bin(k, f0, n, fs);
  std::vector<cdouble> band(n, cdouble{});
  const double hb = window.resolved_half_bandwidth(f0);
  for (std::size_t q = 0; q < n; ++q) {
    const double f = bin_frequency(q, n, fs);
    if (std::abs(f) > hb * (1.0 + 1e-12)) continue;
    band[q] = spectrum[(q + kb) % n] * window_response(window, f0, f);
  }
  return fft::inverse(band);
}

// Fractional mesh coordinate of a physical position; throws when outside.
double mesh_coord(const Mesh& mesh, int axis, double x) {
  const double u = (x - mesh.origin[axis]) / mesh.spacing[axis];
  const double hi = static_cast<double>(mesh.shape[axis] - 1);
  constexpr double kTol = 1e-6;
  if (u < -kTol || u > hi + kTol) {
    throw std::invalid_argument("grid_to_portrait: trajectory leaves the portrait mesh");
  }
  return std::clamp(u, 0.0, hi);
}

cdouble bilinear_sample(const CVolume& v, std::size_t k, double u, double w) {
  const Shape3 s = v.shape();
  const std::size_t i0 = std::min(static_cast<std::size_t>(u), s.nx > 1 ? s.nx - 2 : 0);
  const std::size_t j0 = std::min(static_cast<std::size_t>(w), s.ny > 1 ? s.ny - 2 : 0);
  const std::size_t i1 = std::min(i0 + 1, s.nx - 1), j1 = std::min(j0 + 1, s.ny - 1);
  const double fx = u - i0, fy = w - j0;
  return (1 - fx) * (1 - fy) * v(i0, j0, k) + fx * (1 - fy) * v(i1, j0, k) +
         (1 - fx) * fy * v(i0, j1, k) + fx * fy * v(i1, j1, k);
}

}  // namespace

double WindowSpec::resolved_half_bandwidth(double f0) const {
  return half_bandwidth > 0.0 ? half_bandwidth : 0.5 * f0;
}

void WindowSpec::validate(double f0) const {
  const double hb = resolved_half_bandwidth(f0);
  if (!(hb > 0.0) || hb > 0.5 * f0 * (1.0 + 1e-12)) {
    throw std::invalid_argument("window: half_bandwidth must lie in (0, f0/2]");
  }
}

WindowKind parse_window_kind(const std::string& name) {
  if (name == "hann") return WindowKind::hann;
  if (name == "tophat") return WindowKind::tophat;
  throw std::invalid_argument("unknown window '" + name + "' (expected hann or tophat)");
}

std::string to_string(WindowKind kind) { return kind == WindowKind::hann ? "hann" : "tophat"; }

double window_response(const WindowSpec& w, double f0, double f) {
  const double hb = w.resolved_half_bandwidth(f0);
  const double a = std::abs(f);
  if (a > hb * (1.0 + 1e-12)) return 0.0;
  if (w.kind == WindowKind::tophat) return 1.0;
  const double c = std::cos(0.5 * kPi * std::min(a / hb, 1.0));
  return c * c;
}

std::vector<cdouble> harmonic_filter(std::span<const cdouble> samples, double sample_rate, int k,
                                     const WindowSpec& window, double f0,
                                     bool allow_fundamental) {
  window.validate(f0);
  check_harmonic(k, f0, sample_rate, window.resolved_half_bandwidth(f0), allow_fundamental);
  const std::vector<cdouble> spectrum = fft::forward(samples);
  return filter_spectrum(spectrum, sample_rate, k, window, f0);
}

BasebandSignal harmonic_filter(const TimeSignal& signal, int k, const WindowSpec& window,
                               double f0, bool allow_fundamental) {
  std::vector<cdouble> c(signal.samples.begin(), signal.samples.end());
  BasebandSignal out;
  out.samples = harmonic_filter(c, signal.sample_rate, k, window, f0, allow_fundamental);
  out.sample_rate = signal.sample_rate;
  out.slab_index = signal.slab_index;
  out.harmonic = k;
  return out;
}

Portrait2D grid_to_portrait(const BasebandSignal& filtered, const ScannerConfig& cfg,
                            const Mesh& mesh, const GridOptions& options) {
  if (!(options.sample_phase >= 0.0 && options.sample_phase < 1.0)) {
    throw std::invalid_argument("grid_to_portrait: sample_phase must lie in [0, 1)");
  }
  const RasterTiming tm = raster_timing(cfg);
  const Shape3 plane{mesh.shape.nx, mesh.shape.ny, 1};
  Portrait2D out{CVolume(plane), Volume(plane)};
  const double spp = filtered.sample_rate / cfg.drive_frequency;
  const long long offset = std::llround(options.sample_phase * spp);

  for (std::size_t p = 0; p <= tm.scan_periods; ++p) {
    const long long idx = std::llround(static_cast<double>(p) * spp) + offset;
    if (idx < 0 || static_cast<std::size_t>(idx) >= filtered.samples.size()) break;
    const double t = static_cast<double>(idx) / filtered.sample_rate;
    const Vec3 pos = focus_position(t, cfg);
    const double u = mesh_coord(mesh, 0, pos[0]);
    const double w = mesh_coord(mesh, 1, pos[1]);
    const cdouble val = filtered.samples[static_cast<std::size_t>(idx)];
    if (options.method == GridMethod::nearest) {
      const auto i = static_cast<std::size_t>(std::lround(u));
      const auto j = static_cast<std::size_t>(std::lround(w));
      out.values(i, j, 0) += val;
      out.weight(i, j, 0) += 1.0;
      continue;
    }
    const std::size_t i0 = static_cast<std::size_t>(std::floor(u));
    const std::size_t j0 = static_cast<std::size_t>(std::floor(w));
    const double fx = u - i0, fy = w - j0;
    const double wx[2] = {1.0 - fx, fx};
    const double wy[2] = {1.0 - fy, fy};
    for (int b = 0; b < 2; ++b) {
      for (int a = 0; a < 2; ++a) {
        const double wt = wx[a] * wy[b];
        if (wt <= 0.0) continue;
        const std::size_t i = i0 + a, j = j0 + b;
        if (i >= plane.nx || j >= plane.ny) continue;
        out.values(i, j, 0) += wt * val;
        out.weight(i, j, 0) += wt;
      }
    }
  }
  for (std::size_t n = 0; n < out.values.size(); ++n) {
    if (out.weight[n] > 0.0) out.values[n] /= out.weight[n];
  }
  return out;
}

std::size_t PortraitStack::index_of(int k) const {
  const auto it = std::find(harmonics.begin(), harmonics.end(), k);
  if (it == harmonics.end()) {
    throw std::invalid_argument("portrait stack: harmonic " + std::to_string(k) + " missing");
  }
  return static_cast<std::size_t>(it - harmonics.begin());
}

void PortraitStack::validate() const {
  if (harmonics.empty()) throw std::invalid_argument("portrait stack: no harmonics");
  if (data.size() != harmonics.size()) {
    throw std::invalid_argument("portrait stack: data/harmonic count mismatch");
  }
  for (int k : harmonics) {
    if (k < 2) throw std::invalid_argument("portrait stack: harmonics must be >= 2");
  }
  for (const auto& d : data) require_same_shape(d.shape(), mesh.shape, "portrait stack");
  if (!mask.empty()) require_same_shape(mask.shape(), mesh.shape, "portrait stack mask");
  if (!phases.empty() && phases.size() != harmonics.size()) {
    throw std::invalid_argument("portrait stack: phase count mismatch");
  }
}

PortraitStack form_portraits(const std::vector<TimeSignal>& signals, const ScannerConfig& cfg,
                             const std::vector<int>& harmonics, const WindowSpec& window,
                             const GridOptions& options) {
  if (signals.size() != cfg.z_slabs.size()) {
    throw std::invalid_argument("form_portraits: expected one signal per slab");
  }
  if (harmonics.empty()) throw std::invalid_argument("form_portraits: no harmonics requested");
  window.validate(cfg.drive_frequency);
  for (int k : harmonics) {
    check_harmonic(k, cfg.drive_frequency, cfg.sample_rate,
                   window.resolved_half_bandwidth(cfg.drive_frequency), false);
  }
  PortraitStack stack;
  stack.harmonics = harmonics;
  stack.mesh = portrait_mesh(cfg);
  stack.window = window;
  stack.phases.assign(harmonics.size(), 0.0);
  stack.data.assign(harmonics.size(), CVolume(stack.mesh.shape));
  stack.mask = Volume(stack.mesh.shape);
  const Shape3 s = stack.mesh.shape;
  const std::size_t plane = s.nx * s.ny;

  parallel_for(signals.size(), [&](std::size_t j) {
    const TimeSignal& sig = signals[j];
    std::vector<cdouble> c(sig.samples.begin(), sig.samples.end());
    const std::vector<cdouble> spectrum = fft::forward(c);
    for (std::size_t h = 0; h < harmonics.size(); ++h) {
      BasebandSignal b;
      b.samples = filter_spectrum(spectrum, sig.sample_rate, harmonics[h], window,
                                  cfg.drive_frequency);
      b.sample_rate = sig.sample_rate;
      b.slab_index = j;
      b.harmonic = harmonics[h];
      const Portrait2D p = grid_to_portrait(b, cfg, stack.mesh, options);
      std::copy(p.values.begin(), p.values.end(), stack.data[h].data() + j * plane);
      if (h == 0) {
        for (std::size_t n = 0; n < plane; ++n) {
          stack.mask[j * plane + n] = p.weight[n] > 0.0 ? 1.0 : 0.0;
        }
      }
    }
  });
  return stack;
}

std::vector<TimeSignal> portrait_to_signal(const PortraitStack& stack, const ScannerConfig& cfg) {
  stack.validate();
  if (stack.mesh.shape.nz != cfg.z_slabs.size()) {
    throw std::invalid_argument("portrait_to_signal: slab count mismatch");
  }
  const RasterTiming tm = raster_timing(cfg);
  const Mesh& mesh = stack.mesh;
  std::vector<TimeSignal> out(cfg.z_slabs.size());
  std::vector<cdouble> rot(stack.harmonics.size(), cdouble(1.0, 0.0));
  for (std::size_t h = 0; h < stack.harmonics.size(); ++h) {
    if (!stack.phases.empty()) rot[h] = std::polar(1.0, stack.phases[h]);
  }
  parallel_for(out.size(), [&](std::size_t j) {
    TimeSignal& sig = out[j];
    sig.sample_rate = cfg.sample_rate;
    sig.slab_index = j;
    sig.samples.assign(tm.samples, 0.0);
    for (std::size_t n = 0; n < tm.samples; ++n) {
      const double t = static_cast<double>(n) / cfg.sample_rate;
      const Vec3 pos = focus_position(t, cfg);
      const double u = mesh_coord(mesh, 0, pos[0]);
      const double w = mesh_coord(mesh, 1, pos[1]);
      double acc = 0.0;
      for (std::size_t h = 0; h < stack.harmonics.size(); ++h) {
        const cdouble d = bilinear_sample(stack.data[h], j, u, w) * rot[h];
        const double ph = 2.0 * kPi * stack.harmonics[h] * cfg.drive_frequency * t;
        acc += 2.0 * (d * std::polar(1.0, ph)).real();
      }
      sig.samples[n] = acc;
    }
  });
  return out;
}

std::vector<std::size_t> top_magnitude_roi(const CVolume& portrait, double fraction) {
  if (portrait.empty()) throw std::invalid_argument("top_magnitude_roi: empty portrait");
  const std::size_t n = portrait.size();
  const std::size_t count =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(fraction * n)), 1, n);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + count, idx.end(), [&](std::size_t a, std::size_t b) {
    const double ma = std::norm(portrait[a]), mb = std::norm(portrait[b]);
    return ma != mb ? ma > mb : a < b;
  });
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

double estimate_phase(const CVolume& portrait, const std::vector<std::size_t>& roi) {
  if (roi.empty()) throw std::invalid_argument("estimate_phase: empty roi");
  cdouble acc{};
  double mag = 0.0;
  for (std::size_t i : roi) {
    if (i >= portrait.size()) throw std::out_of_range("estimate_phase: roi index");
    acc += portrait[i] * portrait[i];
    mag += std::norm(portrait[i]);
  }
  if (!(mag > 0.0) || std::abs(acc) <= 1e-300) {
    throw std::invalid_argument("estimate_phase: roi has no signal");
  }
  double theta = 0.5 * std::arg(acc);  // (-pi/2, pi/2]
  if (theta <= -0.5 * kPi) theta += kPi;
  return theta;
}

double estimate_phase(const CVolume& portrait) {
  return estimate_phase(portrait, top_magnitude_roi(portrait));
}

PhaseCorrection apply_phase_correction(const CVolume& portrait, double theta) {
  if (!std::isfinite(theta)) throw std::invalid_argument("apply_phase_correction: theta");
  PhaseCorrection out{Volume(portrait.shape()), 0.0};
  const cdouble rot = std::polar(1.0, -theta);
  double im = 0.0, total = 0.0;
  for (std::size_t n = 0; n < portrait.size(); ++n) {
    const cdouble r = portrait[n] * rot;
    out.real[n] = r.real();
    im += r.imag() * r.imag();
    total += std::norm(r);
  }
  out.imag_fraction = total > 0.0 ? im / total : 0.0;
  return out;
}

std::vector<double> apply_phase_correction(PortraitStack& stack, const std::vector<double>& phases) {
  stack.validate();
  if (phases.size() != stack.harmonics.size()) {
    throw std::invalid_argument("apply_phase_correction: one phase per harmonic required");
  }
  if (stack.phases.empty()) stack.phases.assign(stack.harmonics.size(), 0.0);
  std::vector<double> fractions(phases.size());
  for (std::size_t h = 0; h < phases.size(); ++h) {
    const PhaseCorrection pc = apply_phase_correction(stack.data[h], phases[h]);
    for (std::size_t n = 0; n < pc.real.size(); ++n) stack.data[h][n] = pc.real[n];
    stack.phases[h] += phases[h];
    fractions[h] = pc.imag_fraction;
  }
  stack.phase_corrected = true;
  return fractions;
}

std::vector<double> estimate_phases(const PortraitStack& stack) {
  std::vector<double> out;
  for (const auto& d : stack.data) out.push_back(estimate_phase(d));
  return out;
}

std::vector<double> stack_to_data(const PortraitStack& stack) {
  stack.validate();
  std::vector<double> out;
  out.reserve(stack.data.size() * stack.mesh.shape.size());
  for (const auto& d : stack.data) {
    for (const auto& v : d) out.push_back(v.real());
  }
  return out;
}

void data_to_stack(const std::vector<double>& data, PortraitStack& stack) {
  const std::size_t per = stack.mesh.shape.size();
  if (data.size() != per * stack.harmonics.size()) {
    throw std::invalid_argument("data_to_stack: size mismatch");
  }
  stack.data.assign(stack.harmonics.size(), CVolume(stack.mesh.shape));
  for (std::size_t h = 0; h < stack.harmonics.size(); ++h) {
    for (std::size_t n = 0; n < per; ++n) stack.data[h][n] = data[h * per + n];
  }
}

PortraitStack select_harmonics(const PortraitStack& stack, const std::vector<int>& harmonics) {
  PortraitStack out = stack;
  out.harmonics.clear();
  out.data.clear();
  out.phases.clear();
  for (int k : harmonics) {
    const std::size_t h = stack.index_of(k);
    out.harmonics.push_back(k);
    out.data.push_back(stack.data[h]);
    if (!stack.phases.empty()) out.phases.push_back(stack.phases[h]);
  }
  return out;
}

}  // namespace mh3d
