#pragma once

// On-disk tensor container and metadata sidecars.
//
// Layout (little-endian):
//   "MH3D"            4 bytes
//   version           u16 (1)
//   dtype             u8  (1: f32, 2: c64 as interleaved f32 pairs)
//   ndim              u8
//   dims              ndim x u64, slowest axis first
//   payload           prod(dims) elements, nothing after it
//
// A volume of shape (nx, ny, nz) is stored with dims (nz, ny, nx), so the
// payload order matches the in-memory x-fastest order.

#include <complex>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mh3d/grid.hpp"

namespace mh3d::io {

enum class DType : std::uint8_t { f32 = 1, c64 = 2 };

inline constexpr std::uint16_t kTensorVersion = 1;

struct Tensor {
  DType dtype = DType::f32;
  std::vector<std::uint64_t> dims;
  /// f32: one value per element; c64: real, imaginary pairs.
  std::vector<float> values;

  std::uint64_t element_count() const;
  void validate() const;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(const std::vector<std::uint8_t>& bytes);

/// Written to a temporary in the same directory and renamed into place.
void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

Tensor to_tensor(const Volume& v);
Tensor to_tensor(const CVolume& v);
Tensor to_tensor(const std::vector<double>& v);
/// Requires ndim 1..3 (missing leading dims are 1).
Volume to_volume(const Tensor& t);
CVolume to_cvolume(const Tensor& t);
std::vector<double> to_vector(const Tensor& t);

void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// `dir/name.mh3d` -> `dir/name.json`.
std::filesystem::path sidecar_path(const std::filesystem::path& tensor_path);

std::uint64_t fnv1a64(const std::string& bytes);
/// Hex FNV-1a of the compact dump of `config`.
std::string config_hash(const nlohmann::json& config);

/// Writes `meta` plus config_hash and command_line to the sidecar.
void write_sidecar(const std::filesystem::path& tensor_path, nlohmann::json meta,
                   const nlohmann::json& config, const std::string& command_line);
nlohmann::json read_sidecar(const std::filesystem::path& tensor_path);

}  // namespace mh3d::io
