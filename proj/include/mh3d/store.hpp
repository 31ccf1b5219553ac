#pragma once

// Pipeline artefacts as tensor files with JSON sidecars.

#include <filesystem>
#include <string>

#include "json.hpp"
#include "mh3d/grid.hpp"
#include "mh3d/portrait.hpp"
#include "mh3d/psfgen.hpp"
#include "mh3d/simulate.hpp"

namespace mh3d::store {

namespace fs = std::filesystem;

/// Who produced a file: the configuration it was derived from and the command line.
struct Provenance {
  nlohmann::json config = nlohmann::json::object();
  std::string command_line;
};

nlohmann::json mesh_to_json(const Mesh& m);
Mesh mesh_from_json(const nlohmann::json& j);

/// 1D f32 tensor; sidecar holds sample_rate, slab_index and slab z.
void save_signal(const fs::path& path, const TimeSignal& s, double slab_z, const Provenance& p);
TimeSignal load_signal(const fs::path& path);

/// c64 tensor (harmonic, slab, y, x); sidecar holds harmonics, mesh, window,
/// phases, phase_corrected and the coverage fraction.
void save_portraits(const fs::path& path, const PortraitStack& st, const Provenance& p);
PortraitStack load_portraits(const fs::path& path);

/// f32 tensor (harmonic, component, z, y, x). Kernels are zero-padded to a
/// common centred box; sidecar lists the active components and normalisation.
void save_psf(const fs::path& path, const PsfStack& psf, const Provenance& p);
PsfStack load_psf(const fs::path& path);

/// f32 volume with its mesh and any extra metadata.
void save_volume(const fs::path& path, const Volume& v, const Mesh& mesh, nlohmann::json meta,
                 const Provenance& p);
struct LoadedVolume {
  Volume volume;
  Mesh mesh;
  nlohmann::json meta;
};
LoadedVolume load_volume(const fs::path& path);

}  // namespace mh3d::store
