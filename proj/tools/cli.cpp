#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mh3d/analyze.hpp"
#include "mh3d/config.hpp"
#include "mh3d/forward.hpp"
#include "mh3d/io.hpp"
#include "mh3d/mhad.hpp"
#include "mh3d/portrait.hpp"
#include "mh3d/psfgen.hpp"
#include "mh3d/simd.hpp"
#include "mh3d/simulate.hpp"
#include "mh3d/solve.hpp"
#include "mh3d/store.hpp"

namespace mh3d::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Flag surface units.
constexpr double kMm = 1e-3;
constexpr double kKhz = 1e3;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  std::string command_line;
  std::string harmonics;

  PipelineConfig load() const {
    PipelineConfig c;
    if (!config_path.empty()) c = load_config(config_path);
    if (!harmonics.empty()) {
      try {
        c.portrait.harmonics = parse_harmonics(harmonics);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
    }
    return c;
  }
  store::Provenance provenance(const PipelineConfig& c) const {
    return {to_json(c), command_line};
  }
};

std::array<std::size_t, 3> parse_pad(const std::string& text) {
  std::vector<std::size_t> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    long long n = -1;
    try {
      n = std::stoll(item, &used);
    } catch (const std::exception&) {
    }
    if (n < 0 || used != item.size()) throw UsageError("--pad: cannot parse '" + text + "'");
    v.push_back(static_cast<std::size_t>(n));
  }
  if (v.size() == 1) return {v[0], v[0], v[0]};
  if (v.size() == 3) return {v[0], v[1], v[2]};
  throw UsageError("--pad expects one value or x,y,z");
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  Common common;
  std::string phantom, out;
  std::optional<double> noise_std;
  std::optional<std::uint64_t> seed;
};

int cmd_simulate(const SimulateArgs& a) {
  PipelineConfig cfg = a.common.load();
  if (a.noise_std) cfg.noise.std = *a.noise_std;
  if (a.seed) cfg.noise.seed = *a.seed;
  if (cfg.noise.std < 0.0) throw UsageError("--noise-std must be non-negative");
  if (!fs::exists(a.phantom)) throw io::IoError("phantom file not found: " + a.phantom);
  const Phantom ph = load_phantom(a.phantom);
  auto signals = simulate_all_slabs(ph, cfg.scanner);
  const auto prov = a.common.provenance(cfg);
  for (auto& s : signals) {
    if (cfg.noise.std > 0.0) s = add_noise(s, cfg.noise.std, cfg.noise.seed);
    char name[32];
    std::snprintf(name, sizeof name, "slab_%03zu.mh3d", s.slab_index);
    store::save_signal(fs::path(a.out) / name, s, cfg.scanner.z_slabs[s.slab_index], prov);
  }
  std::printf("wrote %zu slab signals to %s\n", signals.size(), a.out.c_str());
  return kOk;
}

// ---------------------------------------------------------------- portrait

struct PortraitArgs {
  Common common;
  std::string signals, out, window, phase_from;
  std::optional<double> bandwidth_khz;
};

std::vector<TimeSignal> load_signals(const fs::path& dir, std::size_t expected) {
  if (!fs::is_directory(dir)) throw io::IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".mh3d") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<TimeSignal> out;
  for (const auto& f : files) out.push_back(store::load_signal(f));
  std::sort(out.begin(), out.end(),
            [](const TimeSignal& x, const TimeSignal& y) { return x.slab_index < y.slab_index; });
  if (out.size() != expected) {
    throw io::IoError(dir.string() + ": found " + std::to_string(out.size()) +
                      " slab signals, config lists " + std::to_string(expected));
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].slab_index != i) throw io::IoError(dir.string() + ": slab indices are not 0..n-1");
  }
  return out;
}

int cmd_portrait(const PortraitArgs& a) {
  PipelineConfig cfg = a.common.load();
  if (!a.window.empty()) {
    try {
      cfg.portrait.window.kind = parse_window_kind(a.window);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  if (a.bandwidth_khz) cfg.portrait.window.half_bandwidth = *a.bandwidth_khz * kKhz;
  cfg.portrait.window.validate(cfg.scanner.drive_frequency);
  const auto signals = load_signals(a.signals, cfg.scanner.z_slabs.size());
  PortraitStack st =
      form_portraits(signals, cfg.scanner, cfg.portrait.harmonics, cfg.portrait.window, cfg.portrait.grid);
  const auto uncovered = std::count(st.mask.begin(), st.mask.end(), 0.0);
  if (uncovered > 0) {
    throw std::runtime_error("portrait coverage gap: " + std::to_string(uncovered) +
                             " pixels received no samples");
  }
  std::vector<double> phases;
  if (!a.phase_from.empty()) {
    const PsfStack psf = store::load_psf(a.phase_from);
    for (int k : st.harmonics) phases.push_back(psf.normalization[psf.index_of(k)].phase);
  } else {
    phases = estimate_phases(st);
  }
  const auto imag = apply_phase_correction(st, phases);
  store::save_portraits(a.out, st, a.common.provenance(cfg));
  for (std::size_t h = 0; h < st.harmonics.size(); ++h) {
    std::printf("harmonic %d: phase %.4f rad, residual imaginary %.2e\n", st.harmonics[h],
                phases[h], imag[h]);
  }
  return kOk;
}

// ---------------------------------------------------------------- psf

struct PsfArgs {
  Common common;
  std::string out;
  std::optional<double> fine_dz_mm;
};

int cmd_psf(const PsfArgs& a) {
  PipelineConfig cfg = a.common.load();
  if (a.fine_dz_mm) cfg.recon.fine_dz = *a.fine_dz_mm * kMm;
  PsfOptions o;
  o.window = cfg.portrait.window;
  o.grid = cfg.portrait.grid;
  o.truncation = cfg.psf.truncation;
  o.zero_mean_columns = cfg.psf.zero_mean_columns;
  o.overscan = cfg.psf.overscan;
  const Mesh mesh = psf_mesh(cfg.scanner, cfg.psf.half_extent, cfg.recon.fine_dz);
  const PsfStack psf = simulate_psf(cfg.scanner, cfg.portrait.harmonics, mesh, o);
  for (const auto& w : psf.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  store::save_psf(a.out, psf, a.common.provenance(cfg));
  for (const auto& n : psf.normalization) {
    std::printf("harmonic %d: phase %.4f rad, truncated energy %.2e\n", n.harmonic, n.phase,
                n.tail_energy);
  }
  return kOk;
}

// ---------------------------------------------------------------- reconstruct

struct ReconArgs {
  Common common;
  std::string stack, psf, out, pad;
  std::optional<double> lambda, alpha, fine_dz_mm;
  std::optional<std::size_t> iters;
};

int cmd_reconstruct(const ReconArgs& a) {
  PipelineConfig cfg = a.common.load();
  auto& sc = cfg.recon.solver;
  if (a.lambda) sc.lambda = *a.lambda;
  if (a.alpha) sc.alpha = *a.alpha;
  if (a.iters) sc.max_iterations = *a.iters;
  if (a.fine_dz_mm) cfg.recon.fine_dz = *a.fine_dz_mm * kMm;
  if (!a.pad.empty()) cfg.recon.pad = parse_pad(a.pad);
  try {
    sc.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  PortraitStack st = store::load_portraits(a.stack);
  if (!st.phase_corrected) throw UsageError(a.stack + " is not phase corrected");
  PsfStack psf = store::load_psf(a.psf);
  if (std::abs(psf.mesh.spacing[2] - cfg.recon.fine_dz) > 1e-9) {
    throw UsageError("PSF z spacing " + std::to_string(psf.mesh.spacing[2] / kMm) +
                     " mm differs from --fine-dz " + std::to_string(cfg.recon.fine_dz / kMm) + " mm");
  }
  std::vector<int> hs = a.common.harmonics.empty() ? st.harmonics : cfg.portrait.harmonics;
  st = select_harmonics(st, hs);
  psf = select_harmonics(psf, hs);

  ForwardGeometry g;
  g.fine_mesh = reconstruction_mesh(st.mesh, cfg.recon.fine_dz);
  g.slab_z.clear();
  for (std::size_t s = 0; s < st.mesh.shape.nz; ++s) g.slab_z.push_back(st.mesh.axis_coord(2, s));
  g.pad = cfg.recon.pad ? *cfg.recon.pad : kernel_half_support(psf);
  Sensitivity sens;
  for (int c = 0; c < 3; ++c) sens.uniform[c] = psf.component_active(c) ? 1.0 : 0.0;
  const ForwardModel model = build_forward_model(psf, sens, g);

  std::vector<double> data = stack_to_data(st);
  std::vector<int> signs(hs.size(), 1);
  if (cfg.recon.resolve_sign) signs = resolve_sign_ambiguity(model, data);
  const ReconResult r = reconstruct(data, model, sc);

  json trace = {{"iterations", r.trace.iterations},
                {"converged", r.trace.converged},
                {"stop_reason", r.trace.stop_reason},
                {"operator_norm", r.trace.operator_norm},
                {"lambda_abs", r.trace.lambda_abs},
                {"step", r.trace.step},
                {"harmonic_weights", r.trace.harmonic_weights},
                {"setup_seconds", r.trace.setup_seconds},
                {"total_seconds", r.trace.total_seconds},
                {"final_objective", r.trace.objective.empty() ? 0.0 : r.trace.objective.back().total},
                {"residual", r.residual}};
  json meta = {{"kind", "reconstruction"},
               {"harmonics", hs},
               {"signs", signs},
               {"padded_shape", {model.padded_shape().nx, model.padded_shape().ny, model.padded_shape().nz}},
               {"fit_error", fit_error(data, model, r.rho_padded)},
               {"trace", trace}};
  store::save_volume(a.out, r.rho, model.fine_mesh(), meta, a.common.provenance(cfg));
  fs::path csv = a.out;
  csv.replace_extension(".trace.csv");
  io::write_text_atomic(csv, r.trace.to_csv());
  std::printf("%zu iterations (%s), %.2f s, residual %.3e\n", r.trace.iterations,
              r.trace.stop_reason.c_str(), r.trace.total_seconds, r.residual);
  return kOk;
}

// ---------------------------------------------------------------- mhad

struct MhadArgs {
  Common common;
  std::string stack, out;
  std::optional<double> lambda, fine_dz_mm;
};

int cmd_mhad(const MhadArgs& a) {
  PipelineConfig cfg = a.common.load();
  if (a.lambda) cfg.mhad.lambda = *a.lambda;
  if (a.fine_dz_mm) cfg.mhad.fine_dz = *a.fine_dz_mm * kMm;
  const PortraitStack st = store::load_portraits(a.stack);
  MhadConfig mc;
  mc.lambda = cfg.mhad.lambda;
  mc.fine_dz = cfg.mhad.fine_dz;
  mc.gamma_a = cfg.scanner.gamma_a();
  mc.harmonics = a.common.harmonics.empty() ? st.harmonics : cfg.portrait.harmonics;
  try {
    mc.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const MhadResult r = mhad_multi(st, mc);
  for (const auto& w : r.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  store::save_volume(a.out, r.native, st.mesh,
                     {{"kind", "mhad"}, {"harmonics", mc.harmonics}, {"null_bins", r.null_bins},
                      {"warnings", r.warnings}},
                     a.common.provenance(cfg));
  std::printf("native image %s, %zu null bins\n", to_string(r.native.shape()).c_str(), r.null_bins);
  return kOk;
}

// ---------------------------------------------------------------- verify

struct Check {
  std::string name;
  double value;
  double limit;
  bool pass() const { return std::isfinite(value) && value < limit; }
};

// Random kernels on a small padded mesh, for operator checks.
struct SmallModel {
  ForwardModel model;
  std::vector<std::array<Volume, 3>> kernels;
  Sensitivity sensitivity;
};

SmallModel small_model(Shape3 fov, std::array<std::size_t, 3> pad, std::uint64_t seed, bool maps) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  SmallModel s;
  const std::vector<int> hs{2, 3};
  for (std::size_t h = 0; h < hs.size(); ++h) {
    std::array<Volume, 3> per;
    for (int c : {0, 2}) {
      per[c] = Volume({3, 3, 5});
      for (auto& v : per[c]) v = gauss(rng);
    }
    s.kernels.push_back(per);
  }
  s.sensitivity.uniform = {0.5, 0.0, 1.0};
  if (maps) {
    s.sensitivity.maps[0] = Volume(fov);
    for (auto& v : s.sensitivity.maps[0]) v = 1.0 + 0.2 * gauss(rng);
  }
  ForwardGeometry g;
  g.fine_mesh = Mesh::centered(fov, {2e-3, 2e-3, 1e-3});
  for (std::size_t k = 0; k < fov.nz; k += 2) g.slab_z.push_back(g.fine_mesh.axis_coord(2, k));
  g.pad = pad;
  g.smooth_sizes = false;
  s.model = build_forward_model(hs, s.kernels, s.sensitivity, g);
  return s;
}

double dense_deviation(const SmallModel& s, std::uint64_t seed) {
  const auto& m = s.model;
  const auto dense = build_dense_oracle(m, s.kernels, s.sensitivity);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::vector<double> x(m.image_size()), y(m.data_size()), ax(m.data_size()), aty(m.image_size());
  for (auto& v : x) v = gauss(rng);
  for (auto& v : y) v = gauss(rng);
  m.forward(x, ax);
  m.adjoint(y, aty);
  const auto dx = dense_apply(dense, m.data_size(), x);
  const auto dy = dense_apply_transpose(dense, m.image_size(), y);
  double worst = 0.0;
  const double sx = max_abs(dx), sy = max_abs(dy);
  for (std::size_t i = 0; i < dx.size(); ++i) worst = std::max(worst, std::abs(dx[i] - ax[i]) / sx);
  for (std::size_t i = 0; i < dy.size(); ++i) worst = std::max(worst, std::abs(dy[i] - aty[i]) / sy);
  return worst;
}

int cmd_verify(const Common& common) {
  const PipelineConfig cfg = common.load();
  std::vector<Check> checks;

  const auto rows = verify_theorem1(cfg.scanner, {0.05, 0.1, 0.3}, 5);
  double worst = 0.0;
  for (const auto& r : rows) worst = std::max(worst, r.relative_error);
  checks.push_back({"harmonic decomposition, max relative L2 error", worst, 0.05});

  const auto adj = small_model({6, 6, 10}, {1, 1, 2}, 11, true);
  checks.push_back({"adjoint mismatch, 20 pairs", adjoint_mismatch(adj.model, 20, 3), 1e-9});
  checks.push_back({"dense oracle 8^3", dense_deviation(small_model({6, 6, 6}, {1, 1, 1}, 5, true), 7), 1e-10});

  MhadConfig mc;
  mc.gamma_a = cfg.scanner.gamma_a();
  Volume native({4, 4, 32});
  std::mt19937_64 rng(9);
  std::normal_distribution<double> gauss;
  for (auto& v : native) v = gauss(rng);
  const auto d = mhad_synthesize(native, mc);
  const auto back = mhad_multi(d, mc).native;
  double ref = 0.0;
  for (double v : native) ref = std::max(ref, std::abs(v));
  // DC and Nyquist are null bins: compare against the part of the input without them.
  Volume band = native;
  for (std::size_t y = 0; y < 4; ++y) {
    for (std::size_t x = 0; x < 4; ++x) {
      double mean = 0.0, alt = 0.0;
      for (std::size_t z = 0; z < 32; ++z) {
        mean += native(x, y, z) / 32.0;
        alt += native(x, y, z) * (z % 2 ? -1.0 : 1.0) / 32.0;
      }
      for (std::size_t z = 0; z < 32; ++z) band(x, y, z) -= mean + alt * (z % 2 ? -1.0 : 1.0);
    }
  }
  double err = 0.0;
  for (std::size_t i = 0; i < band.size(); ++i) err = std::max(err, std::abs(back[i] - band[i]));
  checks.push_back({"MHAD exactness", err / ref, 1e-10});

  bool ok = true;
  for (const auto& c : checks) {
    std::printf("%s  %-48s %.3e (limit %.0e)\n", c.pass() ? "PASS" : "FAIL", c.name.c_str(), c.value,
                c.limit);
    ok = ok && c.pass();
  }
  return ok ? kOk : kNumerical;
}

// ---------------------------------------------------------------- metrics

struct MetricsArgs {
  std::string image, spec, out, command_line;
};

int cmd_metrics(const MetricsArgs& a) {
  const auto img = store::load_volume(a.image);
  json spec = json::object();
  if (!a.spec.empty()) {
    try {
      spec = json::parse(io::read_text(a.spec));
    } catch (const json::exception& e) {
      throw UsageError(a.spec + ": " + e.what());
    }
  }
  const Mesh& mesh = img.mesh;
  std::vector<Index3> peaks;
  try {
    if (spec.contains("peaks")) {
      for (const auto& p : spec.at("peaks")) {
        const auto pos = p.get<Vec3>();
        Index3 q;
        std::ptrdiff_t* idx[3] = {&q.x, &q.y, &q.z};
        for (int ax = 0; ax < 3; ++ax) {
          const double u = std::round((pos[ax] - mesh.origin[ax]) / mesh.spacing[ax]);
          if (u < 0 || u >= static_cast<double>(mesh.shape[ax])) {
            throw UsageError("peak outside the image: " + p.dump());
          }
          *idx[ax] = static_cast<std::ptrdiff_t>(u);
        }
        peaks.push_back(q);
      }
    } else {
      PeakSearch ps;
      ps.threshold = spec.value("threshold", ps.threshold);
      ps.max_peaks = spec.value("max_peaks", std::size_t{0});
      peaks = find_peaks(img.volume, ps);
    }
  } catch (const json::exception& e) {
    throw UsageError(a.spec + ": " + e.what());
  }
  const std::size_t radius = spec.value("background_radius", std::size_t{3});
  std::vector<std::size_t> idx;
  for (const auto& p : peaks) idx.push_back(linear_index(img.volume.shape(), p));
  const auto bg = background_mask(img.volume.shape(), peaks, radius);

  json report = {{"image", a.image}, {"peaks", json::array()}};
  for (const auto& p : peaks) {
    json entry = {{"index", {p.x, p.y, p.z}},
                  {"position", mesh.position(p.x, p.y, p.z)},
                  {"value", img.volume(p.x, p.y, p.z)}};
    const char* names[3] = {"fwhm_x", "fwhm_y", "fwhm_z"};
    for (int ax = 0; ax < 3; ++ax) {
      try {
        entry[names[ax]] = fwhm(img.volume, mesh.spacing, ax, p, 0);
      } catch (const std::exception&) {
        entry[names[ax]] = nullptr;
      }
    }
    report["peaks"].push_back(entry);
  }
  report["snr_std"] = idx.empty() || bg.empty() ? json(nullptr) : json(snr_std(img.volume, idx, bg));
  report["snr_peak"] = idx.empty() || bg.empty() ? json(nullptr) : json(snr_peak(img.volume, idx, bg));
  if (spec.contains("export_slices")) {
    const auto& e = spec.at("export_slices");
    const auto ex = export_slices(img.volume, e.value("axis", 2), e.at("prefix").get<std::string>());
    report["export"] = {{"min", ex.min}, {"max", ex.max}, {"sidecar", ex.sidecar}};
  }
  report["command_line"] = a.command_line;
  io::write_text_atomic(a.out, report.dump(2) + "\n");
  std::printf("%zu peaks, snr_std %s\n", peaks.size(), report["snr_std"].dump().c_str());
  return kOk;
}

std::string join(const std::vector<std::string>& args) {
  std::string s;
  for (const auto& a : args) {
    if (!s.empty()) s += ' ';
    s += a.find(' ') == std::string::npos ? a : "'" + a + "'";
  }
  return s;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Multi-harmonic 3D magnetic particle imaging toolkit", "mh3d"};
  app.require_subcommand(1);
  const std::string cmdline = join(args);

  auto add_common = [&](CLI::App* sub, Common& c, bool harmonics) {
    sub->add_option("--config", c.config_path, "pipeline configuration (JSON, SI units)")
        ->check(CLI::ExistingFile);
    if (harmonics) sub->add_option("--harmonics", c.harmonics, "harmonics, e.g. 2:5 or 3");
    c.command_line = cmdline;
  };

  SimulateArgs sim;
  auto* s_sim = app.add_subcommand("simulate", "simulate per-slab receive signals");
  add_common(s_sim, sim.common, false);
  s_sim->add_option("--phantom", sim.phantom, "phantom JSON")->required();
  s_sim->add_option("--out", sim.out, "output directory")->required();
  s_sim->add_option("--noise-std", sim.noise_std, "white noise standard deviation (signal units)");
  s_sim->add_option("--seed", sim.seed, "noise seed");

  PortraitArgs por;
  auto* s_por = app.add_subcommand("portrait", "filter, grid and phase-correct harmonic portraits");
  add_common(s_por, por.common, true);
  s_por->add_option("--signals", por.signals, "directory of slab signals")->required();
  s_por->add_option("--out", por.out, "output portrait stack")->required();
  s_por->add_option("--window", por.window, "hann or tophat");
  s_por->add_option("--bandwidth", por.bandwidth_khz, "window half-bandwidth (kHz)");
  s_por->add_option("--phase-from", por.phase_from, "take phases from a PSF file")
      ->check(CLI::ExistingFile);

  PsfArgs psf;
  auto* s_psf = app.add_subcommand("psf", "simulate harmonic PSF kernels");
  add_common(s_psf, psf.common, true);
  s_psf->add_option("--out", psf.out, "output PSF file")->required();
  s_psf->add_option("--fine-dz", psf.fine_dz_mm, "kernel z spacing (mm)");

  ReconArgs rec;
  auto* s_rec = app.add_subcommand("reconstruct", "regularised multi-harmonic reconstruction");
  add_common(s_rec, rec.common, true);
  s_rec->add_option("--stack", rec.stack, "portrait stack")->required()->check(CLI::ExistingFile);
  s_rec->add_option("--psf", rec.psf, "PSF file")->required()->check(CLI::ExistingFile);
  s_rec->add_option("--out", rec.out, "output image")->required();
  s_rec->add_option("--lambda", rec.lambda, "Tikhonov weight");
  s_rec->add_option("--alpha", rec.alpha, "boundary penalty weight");
  s_rec->add_option("--iters", rec.iters, "maximum iterations");
  s_rec->add_option("--pad", rec.pad, "padding in fine voxels: n or x,y,z");
  s_rec->add_option("--fine-dz", rec.fine_dz_mm, "fine mesh z spacing (mm)");

  MhadArgs mh;
  auto* s_mh = app.add_subcommand("mhad", "closed-form native image by anti-differentiation");
  add_common(s_mh, mh.common, true);
  s_mh->add_option("--stack", mh.stack, "portrait stack")->required()->check(CLI::ExistingFile);
  s_mh->add_option("--out", mh.out, "output native image")->required();
  s_mh->add_option("--lambda", mh.lambda, "spectral regularisation");
  s_mh->add_option("--fine-dz", mh.fine_dz_mm, "target z resolution (mm)");

  Common ver;
  auto* s_ver = app.add_subcommand("verify", "run the built-in correctness suites");
  add_common(s_ver, ver, false);

  MetricsArgs met;
  met.command_line = cmdline;
  auto* s_met = app.add_subcommand("metrics", "resolution and SNR report for an image");
  s_met->add_option("--image", met.image, "image file")->required()->check(CLI::ExistingFile);
  s_met->add_option("--spec", met.spec, "metrics spec JSON")->check(CLI::ExistingFile);
  s_met->add_option("--out", met.out, "output report JSON")->required();

  std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return kOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*s_sim) return cmd_simulate(sim);
    if (*s_por) return cmd_portrait(por);
    if (*s_psf) return cmd_psf(psf);
    if (*s_rec) return cmd_reconstruct(rec);
    if (*s_mh) return cmd_mhad(mh);
    if (*s_ver) return cmd_verify(ver);
    if (*s_met) return cmd_metrics(met);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kUsage;
  } catch (const io::IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const SolverDivergence& e) {
    std::fprintf(stderr, "solver diverged: %s (after %zu iterations)\n", e.what(),
                 e.trace().iterations);
    return kNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumerical;
  }
  return kUsage;
}

}  // namespace mh3d::cli
