#ifndef STEERLAB_CONFIG_HPP
#define STEERLAB_CONFIG_HPP

#include <cstdint>
#include <string>

#include <json.hpp>

#include "steerlab/corpus.hpp"
#include "steerlab/lm.hpp"
#include "steerlab/lm_train.hpp"
#include "steerlab/sae.hpp"
#include "steerlab/sae_diag.hpp"
#include "steerlab/screening.hpp"

namespace steerlab {

struct SweepCmdConfig {
  int feature_id = -1;  // required via config or --feature
  int grid_points = 17;
  double omega_minus = 0.0;  // 0/0 requests calibration
  double omega_plus = 0.0;
  double temperature = 1.0;
  std::string persona = "anon";
};

struct DashboardCmdConfig {
  int feature_id = -1;
  int top_k = 20;
  DensityConfig density;
};

struct SimulateCmdConfig {
  nlohmann::json p1;  // policy record
  nlohmann::json p2;  // policy record; random_defector supports an opponent grid
  int n_games = 250;
  int rounds_min = 10;
  int rounds_max = 50;
  int opponent_grid = 26;  // number of p2 defection probabilities spanning [0, 1]
  int gmm_k = 3;
};

// Everything a run needs, with defaults for every field. Unknown keys in the
// config file are rejected; the hash of the canonical (defaults-applied)
// JSON is recorded in every output.
struct RunConfig {
  std::uint64_t seed = 1;
  int workers = 0;
  std::string model_checkpoint;  // inputs for screen/sweep/dashboard/simulate
  std::string sae_checkpoint;

  CorpusConfig corpus;
  LmConfig model;
  LmTrainConfig train_lm;
  int sae_expansion = 8;
  double sae_lambda_l1 = 1e-3;
  SaeTrainConfig train_sae;
  ScreeningConfig screening;
  SweepCmdConfig sweep;
  DashboardCmdConfig dashboard;
  SimulateCmdConfig simulate;

  nlohmann::json canonical;  // defaults-applied JSON
  std::string hash;          // sha256 of canonical.dump()
};

RunConfig default_run_config();

// Parses and validates a config JSON object (already read from file).
RunConfig parse_run_config(const nlohmann::json& user);

// Reads the file (or returns defaults when path is empty) and applies
// CLI overrides afterwards.
RunConfig load_run_config(const std::string& path);

void apply_overrides(RunConfig& cfg, std::int64_t seed, int workers, int feature_id);

// Builds a game policy from a tagged config record, e.g.
// {"kind":"random_defector","p_defect":0.25}. model/sae may be null unless the
// record is a model_agent.
PolicyPtr policy_from_json(const nlohmann::json& record, std::shared_ptr<const ToyLm> model,
                           std::shared_ptr<const SaeModel> sae);

}  // namespace steerlab

#endif  // STEERLAB_CONFIG_HPP
