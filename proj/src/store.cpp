#include "mh3d/store.hpp"

#include <algorithm>

#include "mh3d/io.hpp"

namespace mh3d::store {

using nlohmann::json;

namespace {

json meta_or_throw(const fs::path& path) {
  try {
    return io::read_sidecar(path);
  } catch (const io::IoError&) {
    throw;
  } catch (const std::exception& e) {
    throw io::IoError(io::sidecar_path(path).string() + ": " + e.what());
  }
}

template <class F>
auto field(const json& meta, const fs::path& path, F&& get) {
  try {
    return get(meta);
  } catch (const json::exception& e) {
    throw io::IoError(io::sidecar_path(path).string() + ": " + e.what());
  }
}

void write(const fs::path& path, const io::Tensor& t, json meta, const Provenance& p) {
  io::write_tensor(path, t);
  io::write_sidecar(path, std::move(meta), p.config, p.command_line);
}

}  // namespace

json mesh_to_json(const Mesh& m) {
  return {{"shape", {m.shape.nx, m.shape.ny, m.shape.nz}},
          {"spacing", {m.spacing[0], m.spacing[1], m.spacing[2]}},
          {"origin", {m.origin[0], m.origin[1], m.origin[2]}}};
}

Mesh mesh_from_json(const json& j) {
  Mesh m;
  const auto s = j.at("shape").get<std::array<std::size_t, 3>>();
  m.shape = {s[0], s[1], s[2]};
  m.spacing = j.at("spacing").get<Vec3>();
  m.origin = j.at("origin").get<Vec3>();
  m.validate();
  return m;
}

void save_signal(const fs::path& path, const TimeSignal& s, double slab_z, const Provenance& p) {
  write(path, io::to_tensor(s.samples),
        {{"kind", "signal"}, {"sample_rate", s.sample_rate}, {"slab_index", s.slab_index},
         {"slab_z", slab_z}},
        p);
}

TimeSignal load_signal(const fs::path& path) {
  const json meta = meta_or_throw(path);
  TimeSignal s;
  s.samples = io::to_vector(io::read_tensor(path));
  field(meta, path, [&](const json& m) {
    s.sample_rate = m.at("sample_rate").get<double>();
    s.slab_index = m.at("slab_index").get<std::size_t>();
    return 0;
  });
  return s;
}

void save_portraits(const fs::path& path, const PortraitStack& st, const Provenance& p) {
  st.validate();
  const Shape3 s = st.mesh.shape;
  io::Tensor t;
  t.dtype = io::DType::c64;
  t.dims = {st.harmonics.size(), s.nz, s.ny, s.nx};
  t.values.reserve(2 * st.harmonics.size() * s.size());
  for (const auto& d : st.data) {
    for (const auto& c : d) {
      t.values.push_back(static_cast<float>(c.real()));
      t.values.push_back(static_cast<float>(c.imag()));
    }
  }
  double covered = 0.0;
  for (double m : st.mask) covered += m > 0.0 ? 1.0 : 0.0;
  json meta = {{"kind", "portraits"},
               {"harmonics", st.harmonics},
               {"mesh", mesh_to_json(st.mesh)},
               {"window", to_string(st.window.kind)},
               {"half_bandwidth", st.window.half_bandwidth},
               {"phases", st.phases},
               {"phase_corrected", st.phase_corrected},
               {"coverage", st.mask.empty() ? 1.0 : covered / static_cast<double>(st.mask.size())}};
  write(path, t, std::move(meta), p);
}

PortraitStack load_portraits(const fs::path& path) {
  const json meta = meta_or_throw(path);
  const io::Tensor t = io::read_tensor(path);
  PortraitStack st;
  field(meta, path, [&](const json& m) {
    st.harmonics = m.at("harmonics").get<std::vector<int>>();
    st.mesh = mesh_from_json(m.at("mesh"));
    st.window.kind = parse_window_kind(m.at("window").get<std::string>());
    st.window.half_bandwidth = m.at("half_bandwidth").get<double>();
    st.phases = m.at("phases").get<std::vector<double>>();
    st.phase_corrected = m.at("phase_corrected").get<bool>();
    return 0;
  });
  const Shape3 s = st.mesh.shape;
  if (t.dtype != io::DType::c64 ||
      t.dims != std::vector<std::uint64_t>{st.harmonics.size(), s.nz, s.ny, s.nx}) {
    throw io::IoError(path.string() + ": tensor does not match the portrait sidecar");
  }
  std::size_t n = 0;
  for (std::size_t h = 0; h < st.harmonics.size(); ++h) {
    CVolume d(s);
    for (auto& c : d) {
      c = {t.values[n], t.values[n + 1]};
      n += 2;
    }
    st.data.push_back(std::move(d));
  }
  st.mask = Volume(s, 1.0);
  st.validate();
  return st;
}

void save_psf(const fs::path& path, const PsfStack& psf, const Provenance& p) {
  psf.validate();
  std::vector<int> comps;
  for (int c = 0; c < 3; ++c) {
    if (psf.component_active(c)) comps.push_back(c);
  }
  Shape3 box{1, 1, 1};
  for (const auto& per : psf.kernels) {
    for (int c : comps) {
      const Shape3 s = per[c].shape();
      box = {std::max(box.nx, s.nx), std::max(box.ny, s.ny), std::max(box.nz, s.nz)};
    }
  }
  io::Tensor t;
  t.dims = {psf.harmonics.size(), comps.size(), box.nz, box.ny, box.nx};
  t.values.assign(t.element_count(), 0.0f);
  std::size_t block = 0;
  for (const auto& per : psf.kernels) {
    for (int c : comps) {
      const Volume& k = per[c];
      const Shape3 s = k.shape();
      const std::size_t ox = (box.nx - s.nx) / 2, oy = (box.ny - s.ny) / 2, oz = (box.nz - s.nz) / 2;
      float* dst = t.values.data() + block * box.size();
      for (std::size_t z = 0; z < s.nz; ++z) {
        for (std::size_t y = 0; y < s.ny; ++y) {
          for (std::size_t x = 0; x < s.nx; ++x) {
            dst[(x + ox) + box.nx * ((y + oy) + box.ny * (z + oz))] = static_cast<float>(k(x, y, z));
          }
        }
      }
      ++block;
    }
  }
  json norm = json::array();
  for (const auto& n : psf.normalization) {
    norm.push_back({{"harmonic", n.harmonic},
                    {"prefactor", n.prefactor},
                    {"phase", n.phase},
                    {"tail_energy", n.tail_energy}});
  }
  write(path, t,
        {{"kind", "psf"},
         {"harmonics", psf.harmonics},
         {"components", comps},
         {"mesh", mesh_to_json(psf.mesh)},
         {"normalization", norm},
         {"warnings", psf.warnings}},
        p);
}

PsfStack load_psf(const fs::path& path) {
  const json meta = meta_or_throw(path);
  const io::Tensor t = io::read_tensor(path);
  PsfStack psf;
  std::vector<int> comps;
  field(meta, path, [&](const json& m) {
    psf.harmonics = m.at("harmonics").get<std::vector<int>>();
    comps = m.at("components").get<std::vector<int>>();
    psf.mesh = mesh_from_json(m.at("mesh"));
    for (const auto& n : m.at("normalization")) {
      psf.normalization.push_back({n.at("harmonic").get<int>(), n.at("prefactor").get<double>(),
                                   n.at("phase").get<double>(), n.at("tail_energy").get<double>()});
    }
    psf.warnings = m.at("warnings").get<std::vector<std::string>>();
    return 0;
  });
  if (t.dtype != io::DType::f32 || t.dims.size() != 5 || t.dims[0] != psf.harmonics.size() ||
      t.dims[1] != comps.size()) {
    throw io::IoError(path.string() + ": tensor does not match the PSF sidecar");
  }
  const Shape3 box{t.dims[4], t.dims[3], t.dims[2]};
  std::size_t block = 0;
  for (std::size_t h = 0; h < psf.harmonics.size(); ++h) {
    std::array<Volume, 3> per;
    for (int c : comps) {
      if (c < 0 || c > 2) throw io::IoError(path.string() + ": bad component index");
      per[c] = Volume(box);
      std::copy_n(t.values.begin() + static_cast<std::ptrdiff_t>(block * box.size()), box.size(),
                  per[c].begin());
      ++block;
    }
    psf.kernels.push_back(std::move(per));
  }
  psf.validate();
  return psf;
}

void save_volume(const fs::path& path, const Volume& v, const Mesh& mesh, json meta,
                 const Provenance& p) {
  require_same_shape(v.shape(), mesh.shape, "save_volume");
  meta["kind"] = meta.value("kind", "volume");
  meta["mesh"] = mesh_to_json(mesh);
  write(path, io::to_tensor(v), std::move(meta), p);
}

LoadedVolume load_volume(const fs::path& path) {
  LoadedVolume out;
  out.meta = meta_or_throw(path);
  out.volume = io::to_volume(io::read_tensor(path));
  out.mesh = field(out.meta, path, [](const json& m) { return mesh_from_json(m.at("mesh")); });
  if (!(out.volume.shape() == out.mesh.shape)) {
    throw io::IoError(path.string() + ": tensor does not match the sidecar mesh");
  }
  return out;
}

}  // namespace mh3d::store
