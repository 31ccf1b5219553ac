#include "mh3d/analyze.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace mh3d {
namespace {

std::ptrdiff_t clampi(std::ptrdiff_t v, std::ptrdiff_t lo, std::ptrdiff_t hi) {
  return std::max(lo, std::min(v, hi));
}

double at(const Volume& v, std::ptrdiff_t i, std::ptrdiff_t j, std::ptrdiff_t k) {
  return v(static_cast<std::size_t>(i), static_cast<std::size_t>(j), static_cast<std::size_t>(k));
}

void require_nonempty(const std::vector<std::size_t>& peaks, const std::vector<std::size_t>& bg,
                      std::size_t n, const char* what) {
  if (peaks.empty()) throw std::invalid_argument(std::string(what) + ": no peaks");
  if (bg.empty()) throw std::invalid_argument(std::string(what) + ": empty background");
  for (std::size_t i : peaks) {
    if (i >= n) throw std::out_of_range(std::string(what) + ": peak index out of range");
  }
  for (std::size_t i : bg) {
    if (i >= n) throw std::out_of_range(std::string(what) + ": background index out of range");
  }
}

// 2D view (width x height) of a slice or projection.
struct Plane {
  std::size_t width = 0, height = 0;
  std::vector<double> values;
};

Plane slice(const Volume& v, int axis, std::size_t index) {
  const Shape3 s = v.shape();
  Plane p;
  if (axis == 2) {
    p = {s.nx, s.ny, {}};
    for (std::size_t j = 0; j < s.ny; ++j)
      for (std::size_t i = 0; i < s.nx; ++i) p.values.push_back(v(i, j, index));
  } else if (axis == 1) {
    p = {s.nx, s.nz, {}};
    for (std::size_t k = 0; k < s.nz; ++k)
      for (std::size_t i = 0; i < s.nx; ++i) p.values.push_back(v(i, index, k));
  } else {
    p = {s.ny, s.nz, {}};
    for (std::size_t k = 0; k < s.nz; ++k)
      for (std::size_t j = 0; j < s.ny; ++j) p.values.push_back(v(index, j, k));
  }
  return p;
}

Plane mip(const Volume& v, int axis) {
  Plane p = slice(v, axis, 0);
  for (std::size_t n = 1; n < v.shape()[axis]; ++n) {
    const Plane q = slice(v, axis, n);
    for (std::size_t i = 0; i < p.values.size(); ++i) p.values[i] = std::max(p.values[i], q.values[i]);
  }
  return p;
}

void write_pgm(const std::string& path, const Plane& p, double lo, double hi) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "P5\n" << p.width << ' ' << p.height << "\n65535\n";
  const double range = hi - lo;
  for (double v : p.values) {
    const double u = range > 0.0 ? (v - lo) / range : 0.5;
    const auto q = static_cast<std::uint16_t>(std::lround(std::clamp(u, 0.0, 1.0) * 65535.0));
    const char bytes[2] = {static_cast<char>(q >> 8), static_cast<char>(q & 0xff)};
    os.write(bytes, 2);
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

const char* axis_name(int axis) { return axis == 0 ? "x" : axis == 1 ? "y" : "z"; }

}  // namespace

double fwhm(const Volume& image, const Vec3& spacing, int axis, const Index3& hint,
            std::size_t search_radius) {
  if (axis < 0 || axis > 2) throw std::invalid_argument("fwhm: axis must be 0, 1 or 2");
  const Shape3 s = image.shape();
  const std::ptrdiff_t n[3] = {static_cast<std::ptrdiff_t>(s.nx), static_cast<std::ptrdiff_t>(s.ny),
                               static_cast<std::ptrdiff_t>(s.nz)};
  const std::ptrdiff_t h[3] = {hint.x, hint.y, hint.z};
  for (int a = 0; a < 3; ++a) {
    if (h[a] < 0 || h[a] >= n[a]) throw std::out_of_range("fwhm: hint outside the image");
  }
  const auto r = static_cast<std::ptrdiff_t>(search_radius);
  std::ptrdiff_t p[3] = {h[0], h[1], h[2]};
  double peak = at(image, p[0], p[1], p[2]);
  for (std::ptrdiff_t k = clampi(h[2] - r, 0, n[2] - 1); k <= clampi(h[2] + r, 0, n[2] - 1); ++k)
    for (std::ptrdiff_t j = clampi(h[1] - r, 0, n[1] - 1); j <= clampi(h[1] + r, 0, n[1] - 1); ++j)
      for (std::ptrdiff_t i = clampi(h[0] - r, 0, n[0] - 1); i <= clampi(h[0] + r, 0, n[0] - 1); ++i) {
        if (at(image, i, j, k) > peak) {
          peak = at(image, i, j, k);
          p[0] = i, p[1] = j, p[2] = k;
        }
      }
  if (!(peak > 0.0)) throw std::invalid_argument("fwhm: no positive peak near the hint");
  const double half = 0.5 * peak;
  auto value = [&](std::ptrdiff_t t) {
    std::ptrdiff_t q[3] = {p[0], p[1], p[2]};
    q[axis] = t;
    return at(image, q[0], q[1], q[2]);
  };
  // Fractional positions of the half-maximum crossings on either side.
  auto crossing = [&](int dir) {
    std::ptrdiff_t t = p[axis];
    while (true) {
      const std::ptrdiff_t next = t + dir;
      if (next < 0 || next >= n[axis]) throw std::runtime_error("fwhm: no half-maximum crossing");
      const double a = value(t), b = value(next);
      if (b <= half) return static_cast<double>(t) + dir * (a - half) / (a - b);
      t = next;
    }
  };
  return (crossing(+1) - crossing(-1)) * spacing[axis];
}

double snr_std(const Volume& image, const std::vector<std::size_t>& peaks,
               const std::vector<std::size_t>& background) {
  require_nonempty(peaks, background, image.size(), "snr_std");
  double sig = 0.0;
  for (std::size_t i : peaks) sig += image[i];
  sig /= static_cast<double>(peaks.size());
  double mean = 0.0;
  for (std::size_t i : background) mean += image[i];
  mean /= static_cast<double>(background.size());
  double var = 0.0;
  for (std::size_t i : background) var += (image[i] - mean) * (image[i] - mean);
  var /= static_cast<double>(background.size());
  if (!(var > 0.0)) throw std::invalid_argument("snr_std: background standard deviation is zero");
  return sig / std::sqrt(var);
}

double snr_peak(const Volume& image, const std::vector<std::size_t>& peaks,
                const std::vector<std::size_t>& background) {
  require_nonempty(peaks, background, image.size(), "snr_peak");
  double sig = image[peaks.front()], bg = image[background.front()];
  for (std::size_t i : peaks) sig = std::max(sig, image[i]);
  for (std::size_t i : background) bg = std::max(bg, image[i]);
  if (bg == 0.0) throw std::invalid_argument("snr_peak: background maximum is zero");
  return sig / bg;
}

double fit_error(const std::vector<double>& data, const ForwardModel& model, const Volume& rho) {
  double dn = 0.0;
  for (double d : data) dn += d * d;
  if (!(dn > 0.0)) throw std::invalid_argument("fit_error: data norm is zero");
  const std::vector<double> ar = apply_forward(model, rho);
  double rn = 0.0;
  for (std::size_t i = 0; i < ar.size(); ++i) rn += (ar[i] - data[i]) * (ar[i] - data[i]);
  return std::sqrt(rn / dn);
}

std::size_t linear_index(const Shape3& s, const Index3& p) {
  return static_cast<std::size_t>(p.x) + s.nx * (static_cast<std::size_t>(p.y) + s.ny * static_cast<std::size_t>(p.z));
}

std::vector<Index3> find_peaks(const Volume& image, const PeakSearch& search) {
  const Shape3 s = image.shape();
  const std::ptrdiff_t n[3] = {static_cast<std::ptrdiff_t>(s.nx), static_cast<std::ptrdiff_t>(s.ny),
                               static_cast<std::ptrdiff_t>(s.nz)};
  std::ptrdiff_t lo[3] = {search.box_lo.x, search.box_lo.y, search.box_lo.z};
  std::ptrdiff_t hi[3] = {search.box_hi.x, search.box_hi.y, search.box_hi.z};
  for (int a = 0; a < 3; ++a) {
    lo[a] = clampi(lo[a], 0, n[a] - 1);
    hi[a] = hi[a] < 0 ? n[a] - 1 : clampi(hi[a], 0, n[a] - 1);
  }
  double gmax = 0.0;
  for (double v : image) gmax = std::max(gmax, v);
  if (!(gmax > 0.0)) return {};
  const double floor = search.threshold * gmax;

  std::vector<std::pair<double, Index3>> found;
  for (std::ptrdiff_t k = lo[2]; k <= hi[2]; ++k) {
    for (std::ptrdiff_t j = lo[1]; j <= hi[1]; ++j) {
      for (std::ptrdiff_t i = lo[0]; i <= hi[0]; ++i) {
        const double v = at(image, i, j, k);
        if (v <= floor) continue;
        bool is_max = true;
        for (std::ptrdiff_t dk = -1; dk <= 1 && is_max; ++dk)
          for (std::ptrdiff_t dj = -1; dj <= 1 && is_max; ++dj)
            for (std::ptrdiff_t di = -1; di <= 1 && is_max; ++di) {
              if (di == 0 && dj == 0 && dk == 0) continue;
              const std::ptrdiff_t x = i + di, y = j + dj, z = k + dk;
              if (x < 0 || y < 0 || z < 0 || x >= n[0] || y >= n[1] || z >= n[2]) continue;
              const double w = at(image, x, y, z);
              // A neighbour earlier in memory order wins a tie.
              const bool earlier = (dk < 0) || (dk == 0 && (dj < 0 || (dj == 0 && di < 0)));
              if (w > v || (w == v && earlier)) is_max = false;
            }
        if (is_max) found.push_back({v, Index3{i, j, k}});
      }
    }
  }
  std::stable_sort(found.begin(), found.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<Index3> out;
  for (const auto& f : found) {
    if (search.max_peaks > 0 && out.size() >= search.max_peaks) break;
    out.push_back(f.second);
  }
  return out;
}

std::vector<std::size_t> background_mask(const Shape3& s, const std::vector<Index3>& peaks,
                                         std::size_t radius) {
  std::vector<char> excluded(s.size(), 0);
  const auto r = static_cast<std::ptrdiff_t>(radius);
  const std::ptrdiff_t n[3] = {static_cast<std::ptrdiff_t>(s.nx), static_cast<std::ptrdiff_t>(s.ny),
                               static_cast<std::ptrdiff_t>(s.nz)};
  for (const Index3& p : peaks) {
    for (std::ptrdiff_t k = clampi(p.z - r, 0, n[2] - 1); k <= clampi(p.z + r, 0, n[2] - 1); ++k)
      for (std::ptrdiff_t j = clampi(p.y - r, 0, n[1] - 1); j <= clampi(p.y + r, 0, n[1] - 1); ++j)
        for (std::ptrdiff_t i = clampi(p.x - r, 0, n[0] - 1); i <= clampi(p.x + r, 0, n[0] - 1); ++i)
          excluded[linear_index(s, {i, j, k})] = 1;
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!excluded[i]) out.push_back(i);
  }
  return out;
}

SliceExport export_slices(const Volume& image, int axis, const std::string& prefix) {
  if (axis < 0 || axis > 2) throw std::invalid_argument("export_slices: axis must be 0, 1 or 2");
  if (image.empty()) throw std::invalid_argument("export_slices: empty image");
  SliceExport rec;
  const auto [mn, mx] = std::minmax_element(image.begin(), image.end());
  rec.min = *mn;
  rec.max = *mx;
  const std::size_t count = image.shape()[axis];
  const int width = std::max<int>(3, static_cast<int>(std::to_string(count - 1).size()));
  for (std::size_t n = 0; n < count; ++n) {
    std::string idx = std::to_string(n);
    idx.insert(0, static_cast<std::size_t>(width) - idx.size(), '0');
    const std::string path = prefix + "_" + axis_name(axis) + idx + ".pgm";
    write_pgm(path, slice(image, axis, n), rec.min, rec.max);
    rec.slices.push_back(path);
  }
  for (int a = 0; a < 3; ++a) {
    const std::string path = prefix + "_mip" + axis_name(a) + ".pgm";
    write_pgm(path, mip(image, a), rec.min, rec.max);
    rec.mips.push_back(path);
  }
  nlohmann::json meta;
  meta["min"] = rec.min;
  meta["max"] = rec.max;
  meta["axis"] = axis_name(axis);
  meta["shape"] = {image.shape().nx, image.shape().ny, image.shape().nz};
  meta["slices"] = rec.slices;
  meta["mips"] = rec.mips;
  meta["scale"] = "value = min + (max - min) * pixel / 65535";
  rec.sidecar = prefix + ".json";
  std::ofstream os(rec.sidecar);
  os << meta.dump(2) << '\n';
  if (!os) throw std::runtime_error("cannot write " + rec.sidecar);
  return rec;
}

GrayImage read_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::string magic;
  std::size_t maxval = 0;
  GrayImage img;
  is >> magic >> img.width >> img.height >> maxval;
  if (magic != "P5" || maxval != 65535) throw std::runtime_error(path + ": not a 16-bit PGM");
  is.get();
  img.pixels.resize(img.width * img.height);
  for (auto& p : img.pixels) {
    unsigned char b[2];
    is.read(reinterpret_cast<char*>(b), 2);
    p = static_cast<std::uint16_t>((b[0] << 8) | b[1]);
  }
  if (!is) throw std::runtime_error(path + ": truncated");
  return img;
}

std::vector<double> denormalize(const GrayImage& img, double min, double max) {
  std::vector<double> out;
  out.reserve(img.pixels.size());
  for (auto p : img.pixels) out.push_back(min + (max - min) * static_cast<double>(p) / 65535.0);
  return out;
}

}  // namespace mh3d
