#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "doctest.h"
#include "json.hpp"

using nlohmann::json;

namespace {

namespace fs = std::filesystem;

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "mh3d");
  return mh3d::cli::run(args);
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void put(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

// Small scanner and one point source; files live in a fresh directory.
struct Workspace {
  fs::path dir;
  std::string cfg, phantom;

  explicit Workspace(const std::string& name) {
    dir = fs::temp_directory_path() / ("mh3d_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    cfg = (dir / "cfg.json").string();
    phantom = (dir / "ph.json").string();
    put(cfg, R"({"scanner": {"fov": [0.012, 0.012, 0.0], "z_slabs": [-0.005, 0.0, 0.005]},
                 "psf": {"half_extent": [4, 4, 8]}})");
    put(phantom, R"({"points": [{"position": [0.002, 0.0, 0.001], "weight": 1.0}]})");
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string at(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("cli: usage and input errors exit with 2") {
  Workspace w("usage");
  CHECK(run_cli({}) == mh3d::cli::kUsage);
  CHECK(run_cli({"frobnicate"}) == mh3d::cli::kUsage);
  CHECK(run_cli({"simulate", "--config", w.cfg, "--phantom", w.at("nope.json"), "--out", w.at("sig")}) ==
        mh3d::cli::kUsage);
  CHECK(run_cli({"simulate", "--config", w.at("nope.json"), "--phantom", w.phantom, "--out", w.at("sig")}) ==
        mh3d::cli::kUsage);
  put(w.at("bad.json"), R"({"scanner": {"fov": [64, 64, 0]}})");
  CHECK(run_cli({"simulate", "--config", w.at("bad.json"), "--phantom", w.phantom, "--out", w.at("sig")}) ==
        mh3d::cli::kUsage);
  REQUIRE(run_cli({"simulate", "--config", w.cfg, "--phantom", w.phantom, "--out", w.at("sig")}) == 0);
  CHECK(run_cli({"portrait", "--config", w.cfg, "--signals", w.at("sig"), "--out", w.at("st.mh3d"),
              "--window", "gauss"}) == mh3d::cli::kUsage);
  CHECK(run_cli({"portrait", "--config", w.cfg, "--signals", w.at("sig"), "--out", w.at("st.mh3d"),
              "--harmonics", "1:3"}) == mh3d::cli::kUsage);
}

TEST_CASE("cli: noiseless simulation is reproducible byte for byte") {
  Workspace w("repro");
  for (const char* out : {"a", "b"}) {
    REQUIRE(run_cli({"simulate", "--config", w.cfg, "--phantom", w.phantom, "--out", w.at(out),
                  "--noise-std", "0"}) == 0);
  }
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(w.dir / "a")) {
    if (e.path().extension() != ".mh3d") continue;
    ++files;
    CHECK(slurp(e.path()) == slurp(w.dir / "b" / e.path().filename()));
  }
  CHECK(files == 3);
}

TEST_CASE("cli: pipeline with a one-iteration reconstruction and metrics") {
  Workspace w("pipeline");
  REQUIRE(run_cli({"simulate", "--config", w.cfg, "--phantom", w.phantom, "--out", w.at("sig")}) == 0);
  REQUIRE(run_cli({"psf", "--config", w.cfg, "--out", w.at("psf.mh3d")}) == 0);
  REQUIRE(run_cli({"portrait", "--config", w.cfg, "--signals", w.at("sig"), "--out", w.at("st.mh3d"),
                "--phase-from", w.at("psf.mh3d")}) == 0);
  REQUIRE(run_cli({"reconstruct", "--config", w.cfg, "--stack", w.at("st.mh3d"), "--psf",
                w.at("psf.mh3d"), "--out", w.at("rec.mh3d"), "--iters", "1"}) == 0);

  const json meta = json::parse(slurp(w.at("rec.json")));
  CHECK(meta["trace"]["iterations"] == 1);
  CHECK(meta["command_line"].get<std::string>().find("--iters 1") != std::string::npos);
  CHECK(meta.contains("config_hash"));
  const std::string csv = slurp(w.at("rec.trace.csv"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);

  REQUIRE(run_cli({"reconstruct", "--config", w.cfg, "--stack", w.at("st.mh3d"), "--psf",
                w.at("psf.mh3d"), "--out", w.at("rec.mh3d"), "--lambda", "1e-4"}) == 0);
  put(w.at("spec.json"), R"({"max_peaks": 1})");
  REQUIRE(run_cli({"metrics", "--image", w.at("rec.mh3d"), "--spec", w.at("spec.json"), "--out",
                w.at("m.json")}) == 0);
  const json m = json::parse(slurp(w.at("m.json")));
  REQUIRE(m["peaks"].size() == 1);
  for (const char* key : {"fwhm_x", "fwhm_y", "fwhm_z", "position", "value"}) {
    CHECK(m["peaks"][0].contains(key));
  }
  CHECK(m.contains("snr_std"));
  CHECK(m.contains("snr_peak"));
  CHECK(m.contains("command_line"));
  const auto pos = m["peaks"][0]["position"].get<std::vector<double>>();
  CHECK(std::abs(pos[0] - 0.002) <= 0.002);
  CHECK(std::abs(pos[2] - 0.001) <= 0.001);

  REQUIRE(run_cli({"mhad", "--config", w.cfg, "--stack", w.at("st.mh3d"), "--out", w.at("nat.mh3d")}) == 0);
  CHECK(fs::exists(w.at("nat.json")));
}

TEST_CASE("cli: built-in verification passes") { CHECK(run_cli({"verify"}) == 0); }
