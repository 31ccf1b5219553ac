#include "mh3d/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <system_error>
#include <unistd.h>

namespace mh3d::io {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "tensor I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'M', 'H', '3', 'D'};
constexpr std::size_t kMaxDims = 8;

template <class T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <class T>
T get(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw IoError("tensor: truncated header");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

std::size_t scalars_per_element(DType d) { return d == DType::c64 ? 2 : 1; }

Shape3 shape_from_dims(const Tensor& t) {
  if (t.dims.empty() || t.dims.size() > 3) {
    throw IoError("tensor: expected 1 to 3 dims, got " + std::to_string(t.dims.size()));
  }
  std::uint64_t d[3] = {1, 1, 1};
  const std::size_t off = 3 - t.dims.size();
  for (std::size_t i = 0; i < t.dims.size(); ++i) d[off + i] = t.dims[i];
  return {d[2], d[1], d[0]};
}

}  // namespace

std::uint64_t Tensor::element_count() const {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

void Tensor::validate() const {
  if (dtype != DType::f32 && dtype != DType::c64) throw IoError("tensor: unknown dtype");
  if (dims.size() > kMaxDims) throw IoError("tensor: too many dims");
  if (values.size() != element_count() * scalars_per_element(dtype)) {
    throw IoError("tensor: payload size does not match dims");
  }
}

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  t.validate();
  std::vector<std::uint8_t> out;
  out.reserve(16 + 8 * t.dims.size() + 4 * t.values.size());
  out.insert(out.end(), kMagic, kMagic + 4);
  put<std::uint16_t>(out, kTensorVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(t.dtype));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(t.dims.size()));
  for (auto d : t.dims) put<std::uint64_t>(out, d);
  const auto* p = reinterpret_cast<const std::uint8_t*>(t.values.data());
  out.insert(out.end(), p, p + t.values.size() * sizeof(float));
  return out;
}

Tensor decode_tensor(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw IoError("tensor: bad magic");
  }
  std::size_t pos = 4;
  const auto version = get<std::uint16_t>(bytes, pos);
  if (version != kTensorVersion) {
    throw IoError("tensor: unsupported version " + std::to_string(version));
  }
  Tensor t;
  const auto code = get<std::uint8_t>(bytes, pos);
  if (code != 1 && code != 2) throw IoError("tensor: unknown dtype code " + std::to_string(code));
  t.dtype = static_cast<DType>(code);
  const auto ndim = get<std::uint8_t>(bytes, pos);
  if (ndim > kMaxDims) throw IoError("tensor: too many dims");
  for (std::size_t i = 0; i < ndim; ++i) t.dims.push_back(get<std::uint64_t>(bytes, pos));
  const std::uint64_t scalars = t.element_count() * scalars_per_element(t.dtype);
  if (bytes.size() - pos != scalars * sizeof(float)) {
    throw IoError("tensor: payload is " + std::to_string(bytes.size() - pos) + " bytes, expected " +
                  std::to_string(scalars * sizeof(float)));
  }
  t.values.resize(scalars);
  std::memcpy(t.values.data(), bytes.data() + pos, scalars * sizeof(float));
  return t;
}

void write_bytes_atomic(const fs::path& path, const char* data, std::size_t size) {
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path tmp =
      dir / ("." + path.filename().string() + ".tmp" + std::to_string(::getpid()));
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
    f.write(data, static_cast<std::streamsize>(size));
    f.flush();
    if (!f) {
      fs::remove(tmp, ec);
      throw IoError("write failed: " + tmp.string());
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename into " + path.string());
  }
}

void write_tensor(const fs::path& path, const Tensor& t) {
  const auto bytes = encode_tensor(t);
  write_bytes_atomic(path, reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

Tensor read_tensor(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_tensor(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

Tensor to_tensor(const Volume& v) {
  const auto& s = v.shape();
  Tensor t;
  t.dims = {s.nz, s.ny, s.nx};
  t.values.assign(v.begin(), v.end());
  return t;
}

Tensor to_tensor(const CVolume& v) {
  const auto& s = v.shape();
  Tensor t;
  t.dtype = DType::c64;
  t.dims = {s.nz, s.ny, s.nx};
  t.values.reserve(2 * v.size());
  for (const auto& c : v) {
    t.values.push_back(static_cast<float>(c.real()));
    t.values.push_back(static_cast<float>(c.imag()));
  }
  return t;
}

Tensor to_tensor(const std::vector<double>& v) {
  Tensor t;
  t.dims = {v.size()};
  t.values.assign(v.begin(), v.end());
  return t;
}

Volume to_volume(const Tensor& t) {
  t.validate();
  if (t.dtype != DType::f32) throw IoError("tensor: expected f32");
  Volume v(shape_from_dims(t));
  std::copy(t.values.begin(), t.values.end(), v.begin());
  return v;
}

CVolume to_cvolume(const Tensor& t) {
  t.validate();
  CVolume v(shape_from_dims(t));
  if (t.dtype == DType::f32) {
    std::copy(t.values.begin(), t.values.end(), v.begin());
  } else {
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = {t.values[2 * i], t.values[2 * i + 1]};
  }
  return v;
}

std::vector<double> to_vector(const Tensor& t) {
  t.validate();
  if (t.dtype != DType::f32) throw IoError("tensor: expected f32");
  return {t.values.begin(), t.values.end()};
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  write_bytes_atomic(path, text.data(), text.size());
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path sidecar_path(const fs::path& tensor_path) {
  fs::path p = tensor_path;
  return p.replace_extension(".json");
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const nlohmann::json& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(config.dump())));
  return buf;
}

void write_sidecar(const fs::path& tensor_path, nlohmann::json meta,
                   const nlohmann::json& config, const std::string& command_line) {
  meta["config_hash"] = config_hash(config);
  meta["command_line"] = command_line;
  write_text_atomic(sidecar_path(tensor_path), meta.dump(2) + "\n");
}

nlohmann::json read_sidecar(const fs::path& tensor_path) {
  const auto path = sidecar_path(tensor_path);
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace mh3d::io
