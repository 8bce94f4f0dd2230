#include <doctest.h>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "steerlab/sha256.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kBin = STEERLAB_BIN;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("steerlab-cli-" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

int run(const std::string& args) {
  const std::string cmd = std::string(kBin) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

// Small stack: tiny model, short training, 2-round screening grid.
json fast_config() {
  json j;
  j["corpus"] = {{"n_sequences", 160}, {"rounds_min", 1}, {"rounds_max", 2}, {"noise", 0.1}};
  j["model"] = {{"n_layers", 2}, {"d_model", 16}, {"n_heads", 2}, {"context_window", 128}};
  j["train_lm"] = {{"steps", 120}, {"batch", 4}, {"lr", 0.5}, {"eval_every", 60}};
  j["sae"] = {{"expansion", 4}, {"lambda_l1", 1e-3}};
  j["train_sae"] = {{"steps", 400}, {"batch", 8}, {"lr", 0.05}, {"eval_every", 200}};
  j["screening"] = {{"history_rounds", 2},
                    {"calibrate_per_feature", false},
                    {"fixed_omega_plus", 2.0},
                    {"fixed_omega_minus", -2.0},
                    {"prefilter_personas", json::array({"anon"})}};
  j["sweep"] = {{"grid_points", 5}, {"omega_minus", -2.0}, {"omega_plus", 2.0}};
  j["simulate"] = {{"p1", {{"kind", "wsls"}}},
                   {"p2", {{"kind", "random_defector"}, {"p_defect", 0.5}}},
                   {"n_games", 40},
                   {"rounds_min", 8},
                   {"rounds_max", 16},
                   {"opponent_grid", 9},
                   {"gmm_k", 2}};
  return j;
}

std::string write_config(const TempDir& dir, const json& j, const std::string& name) {
  const std::string path = dir.file(name);
  std::ofstream f(path);
  f << j.dump(2);
  return path;
}

}  // namespace

TEST_CASE("cli end to end: train, screen, dashboard, sweep, simulate") {
  TempDir dir;
  json cfg = fast_config();
  std::string cfg_path = write_config(dir, cfg, "cfg.json");

  const std::string train_out = dir.file("train");
  REQUIRE(run("train --config " + cfg_path + " --seed 5 --out " + train_out) == 0);
  REQUIRE(fs::exists(train_out + "/model.ckpt"));
  REQUIRE(fs::exists(train_out + "/sae.ckpt"));
  REQUIRE(fs::exists(train_out + "/manifest.json"));
  REQUIRE(fs::exists(train_out + "/train_lm_trace.csv"));

  // Screening needs the checkpoints in the config.
  cfg["model_checkpoint"] = train_out + "/model.ckpt";
  cfg["sae_checkpoint"] = train_out + "/sae.ckpt";
  cfg_path = write_config(dir, cfg, "cfg2.json");

  const std::string screen_out = dir.file("screen");
  REQUIRE(run("screen --config " + cfg_path + " --seed 5 --out " + screen_out) == 0);
  REQUIRE(fs::exists(screen_out + "/report.csv"));
  REQUIRE(fs::exists(screen_out + "/report.json"));
  REQUIRE(fs::exists(screen_out + "/delta_histogram.svg"));

  // CSV carries the documented header.
  {
    std::ifstream f(screen_out + "/report.csv");
    std::string header;
    std::getline(f, header);
    CHECK(header ==
          "feature_id,p_plus,p_minus,delta,coherence_plus,coherence_minus,omega_plus,"
          "omega_minus,monotone_fraction");
  }

  const std::string dash_out = dir.file("dash");
  REQUIRE(run("dashboard --config " + cfg_path + " --seed 5 --feature 3 --out " + dash_out) == 0);
  REQUIRE(fs::exists(dash_out + "/dashboard_feature_3.json"));
  REQUIRE(fs::exists(dash_out + "/dashboard_feature_3.svg"));

  const std::string sweep_out = dir.file("sweep");
  REQUIRE(run("sweep --config " + cfg_path + " --seed 5 --feature 3 --out " + sweep_out) == 0);
  REQUIRE(fs::exists(sweep_out + "/sweep_feature_3.csv"));
  {
    // row count = |grid| x |histories| plus a header
    std::ifstream f(sweep_out + "/sweep_feature_3.csv");
    int lines = 0;
    std::string line;
    while (std::getline(f, line)) ++lines;
    CHECK(lines == 1 + 5 * 16);
  }

  const std::string sim_out = dir.file("sim");
  REQUIRE(run("simulate --config " + cfg_path + " --seed 5 --out " + sim_out) == 0);
  REQUIRE(fs::exists(sim_out + "/games.csv"));
  REQUIRE(fs::exists(sim_out + "/defection_scatter.svg"));
  REQUIRE(fs::exists(sim_out + "/gmm_clusters.svg"));
}

TEST_CASE("cli exit codes: config, artifact and missing-input errors") {
  TempDir dir;

  // Unknown key -> 2
  std::string bad = write_config(dir, json::parse(R"({"unknown_key": 1})"), "bad.json");
  CHECK(run("train --config " + bad + " --out " + dir.file("x1")) == 2);

  // Screen without checkpoints -> 2
  std::string cfg_path = write_config(dir, fast_config(), "cfg.json");
  CHECK(run("screen --config " + cfg_path + " --out " + dir.file("x2")) == 2);

  // Corrupt checkpoint -> 5
  json cfg = fast_config();
  const std::string fake = dir.file("fake.ckpt");
  {
    std::ofstream f(fake, std::ios::binary);
    f << "garbage garbage garbage";
  }
  cfg["model_checkpoint"] = fake;
  cfg["sae_checkpoint"] = fake;
  std::string corrupt = write_config(dir, cfg, "corrupt.json");
  CHECK(run("screen --config " + corrupt + " --out " + dir.file("x3")) == 5);

  // Invalid JSON -> 2
  const std::string notjson = dir.file("notjson.json");
  {
    std::ofstream f(notjson);
    f << "{ not json";
  }
  CHECK(run("train --config " + notjson + " --out " + dir.file("x4")) == 2);

  // Empty/invalid policy spec -> 2
  json badpol = fast_config();
  badpol["simulate"]["p1"] = json::object();
  std::string badpol_path = write_config(dir, badpol, "badpol.json");
  CHECK(run("simulate --config " + badpol_path + " --out " + dir.file("x5")) == 2);
}

TEST_CASE("simulate: same seed gives identical csv digests") {
  TempDir dir;
  std::string cfg_path = write_config(dir, fast_config(), "cfg.json");
  const std::string a = dir.file("a");
  const std::string b = dir.file("b");
  REQUIRE(run("simulate --config " + cfg_path + " --seed 9 --out " + a) == 0);
  REQUIRE(run("simulate --config " + cfg_path + " --seed 9 --out " + b) == 0);
  CHECK(steerlab::Sha256::of_file(a + "/games.csv") ==
        steerlab::Sha256::of_file(b + "/games.csv"));
  // and identical SVG bytes
  CHECK(steerlab::Sha256::of_file(a + "/defection_scatter.svg") ==
        steerlab::Sha256::of_file(b + "/defection_scatter.svg"));
}

TEST_CASE("screen digests are identical across worker counts") {
  TempDir dir;
  json cfg = fast_config();
  std::string cfg_path = write_config(dir, cfg, "cfg.json");
  const std::string train_out = dir.file("train");
  REQUIRE(run("train --config " + cfg_path + " --seed 7 --out " + train_out) == 0);

  cfg["model_checkpoint"] = train_out + "/model.ckpt";
  cfg["sae_checkpoint"] = train_out + "/sae.ckpt";
  cfg_path = write_config(dir, cfg, "cfg2.json");

  const std::string w1 = dir.file("w1");
  const std::string w8 = dir.file("w8");
  REQUIRE(run("screen --config " + cfg_path + " --seed 7 --workers 1 --out " + w1) == 0);
  REQUIRE(run("screen --config " + cfg_path + " --seed 7 --workers 8 --out " + w8) == 0);
  CHECK(steerlab::Sha256::of_file(w1 + "/report.json") ==
        steerlab::Sha256::of_file(w8 + "/report.json"));
  CHECK(steerlab::Sha256::of_file(w1 + "/report.csv") ==
        steerlab::Sha256::of_file(w8 + "/report.csv"));
}
