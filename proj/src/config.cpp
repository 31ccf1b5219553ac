#include "mh3d/config.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "mh3d/io.hpp"

namespace mh3d {

using nlohmann::json;

namespace {

// Lengths beyond this are almost certainly millimetres written as metres.
constexpr double kMaxLength = 10.0;

/// Cursor into a JSON document that remembers its path for error messages.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  const json& raw() const { return j_; }
  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(path_, msg); }

  void require_object(std::initializer_list<const char*> allowed) const {
    if (!j_.is_object()) fail("expected an object");
    std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j_.items()) {
      if (!keys.count(k)) throw ConfigError(path_ + "." + k, "unknown key");
    }
  }
  bool has(const char* key) const { return j_.contains(key); }
  Node at(const char* key) const { return {j_.at(key), path_ + "." + key}; }
  Node at(std::size_t i) const { return {j_.at(i), path_ + "[" + std::to_string(i) + "]"}; }

  double number() const {
    if (!j_.is_number()) fail("expected a number");
    const double v = j_.get<double>();
    if (!std::isfinite(v)) fail("must be finite");
    return v;
  }
  double positive() const {
    const double v = number();
    if (!(v > 0.0)) fail("must be positive");
    return v;
  }
  double non_negative() const {
    const double v = number();
    if (v < 0.0) fail("must be non-negative");
    return v;
  }
  double length() const {
    const double v = number();
    if (std::abs(v) > kMaxLength) fail("length in metres expected (got " + std::to_string(v) + ")");
    return v;
  }
  std::int64_t integer() const {
    if (!j_.is_number_integer()) fail("expected an integer");
    return j_.get<std::int64_t>();
  }
  std::size_t count() const {
    const auto v = integer();
    if (v < 0) fail("must be non-negative");
    return static_cast<std::size_t>(v);
  }
  bool boolean() const {
    if (!j_.is_boolean()) fail("expected true or false");
    return j_.get<bool>();
  }
  std::string string() const {
    if (!j_.is_string()) fail("expected a string");
    return j_.get<std::string>();
  }
  std::size_t array(std::size_t expected = 0) const {
    if (!j_.is_array()) fail("expected an array");
    if (expected && j_.size() != expected) {
      fail("expected " + std::to_string(expected) + " entries, got " + std::to_string(j_.size()));
    }
    return j_.size();
  }
  Vec3 vec3(bool lengths) const {
    array(3);
    Vec3 v;
    for (std::size_t i = 0; i < 3; ++i) v[i] = lengths ? at(i).length() : at(i).number();
    return v;
  }

 private:
  const json& j_;
  std::string path_;
};

template <class T>
void read(const Node& n, const char* key, T& out, T (Node::*get)() const) {
  if (n.has(key)) out = (n.at(key).*get)();
}

template <class E>
E parse_enum(const Node& n, std::initializer_list<std::pair<const char*, E>> options) {
  const std::string s = n.string();
  std::string names;
  for (const auto& [name, value] : options) {
    if (s == name) return value;
    names += names.empty() ? name : std::string(", ") + name;
  }
  n.fail("unknown value '" + s + "' (expected one of " + names + ")");
}

std::vector<int> harmonics_from(const Node& n) {
  const std::size_t m = n.array();
  if (m == 0) n.fail("must not be empty");
  std::vector<int> out;
  for (std::size_t i = 0; i < m; ++i) {
    const auto k = n.at(i).integer();
    if (k < 2) n.at(i).fail("harmonics must be >= 2");
    if (!out.empty() && k <= out.back()) n.at(i).fail("harmonics must be strictly increasing");
    out.push_back(static_cast<int>(k));
  }
  return out;
}

std::array<std::size_t, 3> triple(const Node& n) {
  n.array(3);
  return {n.at(std::size_t{0}).count(), n.at(1).count(), n.at(2).count()};
}

ScannerConfig scanner_from(const Node& n) {
  n.require_object({"gradient", "drive_frequency", "drive_amplitude", "beta", "sample_rate",
                    "magnetic_moment", "z_slabs", "fov", "raster", "max_harmonic"});
  ScannerConfig c = reference_preset();
  if (n.has("gradient")) {
    const Node g = n.at("gradient");
    g.array(3);
    for (std::size_t r = 0; r < 3; ++r) c.gradient[r] = g.at(r).vec3(false);
  }
  read(n, "drive_frequency", c.drive_frequency, &Node::positive);
  read(n, "drive_amplitude", c.drive_amplitude, &Node::non_negative);
  if (c.drive_amplitude > 1.0) n.at("drive_amplitude").fail("tesla expected");
  read(n, "beta", c.beta, &Node::positive);
  read(n, "sample_rate", c.sample_rate, &Node::positive);
  read(n, "magnetic_moment", c.magnetic_moment, &Node::positive);
  if (n.has("z_slabs")) {
    const Node z = n.at("z_slabs");
    c.z_slabs.clear();
    for (std::size_t i = 0, m = z.array(); i < m; ++i) c.z_slabs.push_back(z.at(i).length());
  }
  if (n.has("fov")) c.fov = n.at("fov").vec3(true);
  if (n.has("raster")) {
    const Node r = n.at("raster");
    r.require_object({"pixel_spacing", "periods_per_pixel"});
    if (r.has("pixel_spacing")) c.raster.pixel_spacing = r.at("pixel_spacing").length();
    if (r.has("periods_per_pixel")) {
      c.raster.periods_per_pixel = static_cast<int>(r.at("periods_per_pixel").count());
    }
  }
  if (n.has("max_harmonic")) c.max_harmonic = static_cast<int>(n.at("max_harmonic").count());
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    if (what.find("z_slabs") != std::string::npos && n.has("z_slabs")) n.at("z_slabs").fail(what);
    n.fail(what);
  }
  return c;
}

SolverConfig solver_from(const Node& n, SolverConfig s) {
  read(n, "lambda", s.lambda, &Node::non_negative);
  if (n.has("lambda_scale")) {
    s.lambda_scale = parse_enum<LambdaScale>(
        n.at("lambda_scale"), {{"relative", LambdaScale::relative}, {"absolute", LambdaScale::absolute}});
  }
  if (n.has("tikhonov_order")) s.tikhonov_order = static_cast<int>(n.at("tikhonov_order").integer());
  if (n.has("tikhonov_path")) {
    s.tikhonov_path = parse_enum<TikhonovPath>(
        n.at("tikhonov_path"), {{"stencil", TikhonovPath::stencil}, {"spectral", TikhonovPath::spectral}});
  }
  if (n.has("harmonic_weighting")) {
    s.harmonic_weighting = parse_enum<HarmonicWeighting>(
        n.at("harmonic_weighting"),
        {{"none", HarmonicWeighting::none}, {"unit_energy", HarmonicWeighting::unit_energy}});
  }
  read(n, "alpha", s.alpha, &Node::non_negative);
  read(n, "boundary_margin", s.boundary_margin, &Node::count);
  read(n, "nonneg", s.nonneg, &Node::boolean);
  read(n, "max_iterations", s.max_iterations, &Node::count);
  read(n, "tolerance", s.tolerance, &Node::non_negative);
  read(n, "tolerance_window", s.tolerance_window, &Node::count);
  read(n, "step_safety", s.step_safety, &Node::positive);
  read(n, "fixed_step", s.fixed_step, &Node::non_negative);
  read(n, "power_iterations", s.power_iterations, &Node::count);
  if (n.has("seed")) s.seed = n.at("seed").count();
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    n.fail(e.what());
  }
  return s;
}

}  // namespace

std::string to_string(LambdaScale s) { return s == LambdaScale::relative ? "relative" : "absolute"; }
std::string to_string(TikhonovPath p) { return p == TikhonovPath::stencil ? "stencil" : "spectral"; }
std::string to_string(HarmonicWeighting w) {
  return w == HarmonicWeighting::none ? "none" : "unit_energy";
}

std::vector<int> parse_harmonics(const std::string& text) {
  std::vector<int> out;
  auto to_int = [&](const std::string& s) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) {
      throw std::invalid_argument("harmonics: cannot parse '" + text + "'");
    }
    return v;
  };
  if (const auto colon = text.find(':'); colon != std::string::npos) {
    const int lo = to_int(text.substr(0, colon)), hi = to_int(text.substr(colon + 1));
    if (hi < lo) throw std::invalid_argument("harmonics: empty range '" + text + "'");
    for (int k = lo; k <= hi; ++k) out.push_back(k);
  } else {
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_int(item));
  }
  if (out.empty()) throw std::invalid_argument("harmonics: empty list");
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] < 2) throw std::invalid_argument("harmonics: values must be >= 2");
    if (i && out[i] <= out[i - 1]) {
      throw std::invalid_argument("harmonics: values must be strictly increasing");
    }
  }
  return out;
}

ScannerConfig scanner_from_json(const json& j) { return scanner_from(Node(j, "$")); }

json to_json(const ScannerConfig& c) {
  json g = json::array();
  for (const auto& row : c.gradient) g.push_back({row[0], row[1], row[2]});
  return {{"gradient", g},
          {"drive_frequency", c.drive_frequency},
          {"drive_amplitude", c.drive_amplitude},
          {"beta", c.beta},
          {"sample_rate", c.sample_rate},
          {"magnetic_moment", c.magnetic_moment},
          {"z_slabs", c.z_slabs},
          {"fov", {c.fov[0], c.fov[1], c.fov[2]}},
          {"raster",
           {{"pixel_spacing", c.raster.pixel_spacing},
            {"periods_per_pixel", c.raster.periods_per_pixel}}},
          {"max_harmonic", c.max_harmonic}};
}

void PipelineConfig::validate() const {
  scanner.validate();
  portrait.window.validate(scanner.drive_frequency);
  recon.solver.validate();
  if (!(recon.fine_dz > 0.0) || !(mhad.fine_dz > 0.0)) {
    throw std::invalid_argument("fine_dz must be positive");
  }
  if (!(noise.std >= 0.0)) throw std::invalid_argument("noise.std must be non-negative");
}

PipelineConfig config_from_json(const json& j) {
  const Node root(j, "$");
  root.require_object({"scanner", "portrait", "psf", "reconstruction", "mhad", "noise"});
  PipelineConfig c;
  if (root.has("scanner")) c.scanner = scanner_from(root.at("scanner"));

  if (root.has("portrait")) {
    const Node n = root.at("portrait");
    n.require_object({"harmonics", "window", "half_bandwidth", "grid", "sample_phase"});
    if (n.has("harmonics")) c.portrait.harmonics = harmonics_from(n.at("harmonics"));
    if (n.has("window")) {
      c.portrait.window.kind = parse_enum<WindowKind>(
          n.at("window"), {{"hann", WindowKind::hann}, {"tophat", WindowKind::tophat}});
    }
    read(n, "half_bandwidth", c.portrait.window.half_bandwidth, &Node::non_negative);
    if (n.has("grid")) {
      c.portrait.grid.method = parse_enum<GridMethod>(
          n.at("grid"), {{"bilinear", GridMethod::bilinear}, {"nearest", GridMethod::nearest}});
    }
    read(n, "sample_phase", c.portrait.grid.sample_phase, &Node::number);
    try {
      c.portrait.window.validate(c.scanner.drive_frequency);
    } catch (const std::invalid_argument& e) {
      n.fail(e.what());
    }
  }

  if (root.has("psf")) {
    const Node n = root.at("psf");
    n.require_object({"half_extent", "truncation", "zero_mean_columns", "overscan"});
    if (n.has("half_extent")) c.psf.half_extent = triple(n.at("half_extent"));
    read(n, "truncation", c.psf.truncation, &Node::non_negative);
    read(n, "zero_mean_columns", c.psf.zero_mean_columns, &Node::boolean);
    read(n, "overscan", c.psf.overscan, &Node::count);
  }

  if (root.has("reconstruction")) {
    const Node n = root.at("reconstruction");
    n.require_object({"lambda", "lambda_scale", "tikhonov_order", "tikhonov_path",
                      "harmonic_weighting", "alpha", "boundary_margin", "nonneg",
                      "max_iterations", "tolerance", "tolerance_window", "step_safety",
                      "fixed_step", "power_iterations", "seed", "fine_dz", "pad", "resolve_sign"});
    c.recon.solver = solver_from(n, c.recon.solver);
    if (n.has("fine_dz")) c.recon.fine_dz = n.at("fine_dz").length();
    if (n.has("pad") && !n.at("pad").raw().is_null()) c.recon.pad = triple(n.at("pad"));
    read(n, "resolve_sign", c.recon.resolve_sign, &Node::boolean);
    if (!(c.recon.fine_dz > 0.0)) n.at("fine_dz").fail("must be positive");
  }

  if (root.has("mhad")) {
    const Node n = root.at("mhad");
    n.require_object({"lambda", "fine_dz"});
    read(n, "lambda", c.mhad.lambda, &Node::non_negative);
    if (n.has("fine_dz")) c.mhad.fine_dz = n.at("fine_dz").length();
    if (!(c.mhad.fine_dz > 0.0)) n.at("fine_dz").fail("must be positive");
  }

  if (root.has("noise")) {
    const Node n = root.at("noise");
    n.require_object({"std", "seed"});
    read(n, "std", c.noise.std, &Node::non_negative);
    if (n.has("seed")) c.noise.seed = n.at("seed").count();
  }
  return c;
}

json to_json(const PipelineConfig& c) {
  const auto& s = c.recon.solver;
  json recon = {{"lambda", s.lambda},
                {"lambda_scale", to_string(s.lambda_scale)},
                {"tikhonov_order", s.tikhonov_order},
                {"tikhonov_path", to_string(s.tikhonov_path)},
                {"harmonic_weighting", to_string(s.harmonic_weighting)},
                {"alpha", s.alpha},
                {"boundary_margin", s.boundary_margin},
                {"nonneg", s.nonneg},
                {"max_iterations", s.max_iterations},
                {"tolerance", s.tolerance},
                {"tolerance_window", s.tolerance_window},
                {"step_safety", s.step_safety},
                {"fixed_step", s.fixed_step},
                {"power_iterations", s.power_iterations},
                {"seed", s.seed},
                {"fine_dz", c.recon.fine_dz},
                {"resolve_sign", c.recon.resolve_sign}};
  recon["pad"] = c.recon.pad ? json{(*c.recon.pad)[0], (*c.recon.pad)[1], (*c.recon.pad)[2]}
                             : json(nullptr);
  return {{"scanner", to_json(c.scanner)},
          {"portrait",
           {{"harmonics", c.portrait.harmonics},
            {"window", to_string(c.portrait.window.kind)},
            {"half_bandwidth", c.portrait.window.half_bandwidth},
            {"grid", c.portrait.grid.method == GridMethod::bilinear ? "bilinear" : "nearest"},
            {"sample_phase", c.portrait.grid.sample_phase}}},
          {"psf",
           {{"half_extent", c.psf.half_extent},
            {"truncation", c.psf.truncation},
            {"zero_mean_columns", c.psf.zero_mean_columns},
            {"overscan", c.psf.overscan}}},
          {"reconstruction", recon},
          {"mhad", {{"lambda", c.mhad.lambda}, {"fine_dz", c.mhad.fine_dz}}},
          {"noise", {{"std", c.noise.std}, {"seed", c.noise.seed}}}};
}

static json parse_file(const std::filesystem::path& path) {
  const std::string text = io::read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string(), e.what());
  }
}

PipelineConfig load_config(const std::filesystem::path& path) {
  return config_from_json(parse_file(path));
}

Phantom phantom_from_json(const json& j, const std::filesystem::path& base_dir) {
  const Node root(j, "$");
  root.require_object({"points", "voxels", "sensitivity"});
  Phantom p;
  if (root.has("points")) {
    const Node pts = root.at("points");
    for (std::size_t i = 0, m = pts.array(); i < m; ++i) {
      const Node q = pts.at(i);
      q.require_object({"position", "weight"});
      if (!q.has("position")) q.fail("missing position");
      p.points.push_back({q.at("position").vec3(true),
                          q.has("weight") ? q.at("weight").non_negative() : 1.0});
    }
  }
  if (root.has("voxels")) {
    const Node v = root.at("voxels");
    v.require_object({"origin", "spacing", "shape", "values", "file"});
    VoxelPhantom vp;
    if (!v.has("spacing") || !v.has("shape")) v.fail("spacing and shape are required");
    const auto shape = triple(v.at("shape"));
    vp.mesh.shape = {shape[0], shape[1], shape[2]};
    vp.mesh.spacing = v.at("spacing").vec3(true);
    vp.mesh.origin = v.has("origin") ? v.at("origin").vec3(true)
                                     : Mesh::centered(vp.mesh.shape, vp.mesh.spacing).origin;
    if (v.has("values") == v.has("file")) v.fail("exactly one of values and file is required");
    if (v.has("values")) {
      const Node vals = v.at("values");
      const std::size_t m = vals.array(vp.mesh.shape.size());
      vp.density = Volume(vp.mesh.shape);
      for (std::size_t i = 0; i < m; ++i) vp.density[i] = vals.at(i).non_negative();
    } else {
      const std::filesystem::path f = base_dir / v.at("file").string();
      try {
        vp.density = io::to_volume(io::read_tensor(f));
      } catch (const io::IoError& e) {
        v.at("file").fail(e.what());
      }
      if (!(vp.density.shape() == vp.mesh.shape)) v.at("file").fail("tensor shape does not match");
    }
    p.voxels = std::move(vp);
  }
  if (root.has("sensitivity")) p.sensitivity = root.at("sensitivity").vec3(false);
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    root.fail(e.what());
  }
  return p;
}

Phantom load_phantom(const std::filesystem::path& path) {
  return phantom_from_json(parse_file(path), path.parent_path());
}

}  // namespace mh3d
