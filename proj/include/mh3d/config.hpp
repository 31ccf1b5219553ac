#pragma once

// JSON pipeline configuration and phantoms. Values in JSON are SI (m, Hz, T).
// Missing keys keep their defaults; unknown keys and type or unit errors are
// reported with the JSON path of the offending value.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mh3d/physics.hpp"
#include "mh3d/portrait.hpp"
#include "mh3d/psfgen.hpp"
#include "mh3d/simulate.hpp"
#include "mh3d/solve.hpp"

namespace mh3d {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, const std::string& message)
      : std::runtime_error(path + ": " + message), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct PortraitSettings {
  std::vector<int> harmonics{2, 3, 4, 5};
  WindowSpec window;
  GridOptions grid;
};

struct PsfSettings {
  /// Kernel generation box, voxels either side of the centre (x, y, z).
  std::array<std::size_t, 3> half_extent{12, 12, 20};
  double truncation = 1e-4;
  bool zero_mean_columns = true;
  std::size_t overscan = 4;
};

struct ReconSettings {
  SolverConfig solver;
  double fine_dz = 1e-3;
  /// Padding per axis in fine voxels; empty means the kernel half support.
  std::optional<std::array<std::size_t, 3>> pad;
  bool resolve_sign = true;
};

struct MhadSettings {
  double lambda = 0.0;
  double fine_dz = 1e-3;
};

struct NoiseSettings {
  double std = 0.0;
  std::uint64_t seed = 1;
};

struct PipelineConfig {
  ScannerConfig scanner = reference_preset();
  PortraitSettings portrait;
  PsfSettings psf;
  ReconSettings recon;
  MhadSettings mhad;
  NoiseSettings noise;

  void validate() const;
};

PipelineConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PipelineConfig& c);
PipelineConfig load_config(const std::filesystem::path& path);

/// Phantom voxel grids may be inline ("values") or a tensor file ("file",
/// resolved relative to the phantom file).
Phantom phantom_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
Phantom load_phantom(const std::filesystem::path& path);

ScannerConfig scanner_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScannerConfig& c);

std::string to_string(LambdaScale s);
std::string to_string(TikhonovPath p);
std::string to_string(HarmonicWeighting w);

/// Parses "2:5", "3" or "2,3,5".
std::vector<int> parse_harmonics(const std::string& text);

}  // namespace mh3d
