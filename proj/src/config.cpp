#include "steerlab/config.hpp"

#include <fstream>
#include <map>
#include <set>

#include "steerlab/agent.hpp"
#include "steerlab/checkpoint.hpp"
#include "steerlab/sha256.hpp"

namespace steerlab {

using nlohmann::json;

namespace {

json default_json() {
  RunConfig d;  // struct defaults
  json j;
  j["seed"] = 1;
  j["workers"] = 0;
  j["model_checkpoint"] = "";
  j["sae_checkpoint"] = "";
  j["corpus"] = {{"n_sequences", d.corpus.n_sequences},
                 {"rounds_min", d.corpus.rounds_min},
                 {"rounds_max", d.corpus.rounds_max},
                 {"noise", d.corpus.noise},
                 {"persona_mix", d.corpus.persona_mix},
                 {"marker_dropout", d.corpus.marker_dropout},
                 {"dove_teacher", d.corpus.dove_teacher},
                 {"hawk_teacher", d.corpus.hawk_teacher}};
  j["model"] = {{"n_layers", d.model.n_layers},
                {"d_model", d.model.d_model},
                {"n_heads", d.model.n_heads},
                {"d_ff", d.model.d_ff},
                {"context_window", d.model.context_window},
                {"hook_layer", d.model.hook_layer}};
  j["train_lm"] = {{"steps", d.train_lm.steps},
                   {"batch", d.train_lm.batch},
                   {"lr", d.train_lm.lr},
                   {"holdout_fraction", d.train_lm.holdout_fraction},
                   {"target_accuracy", d.train_lm.target_accuracy},
                   {"eval_every", d.train_lm.eval_every}};
  j["sae"] = {{"expansion", d.sae_expansion}, {"lambda_l1", d.sae_lambda_l1}};
  j["train_sae"] = {{"steps", d.train_sae.steps},
                    {"batch", d.train_sae.batch},
                    {"lr", d.train_sae.lr},
                    {"holdout_fraction", d.train_sae.holdout_fraction},
                    {"eval_every", d.train_sae.eval_every}};
  j["screening"] = {{"history_rounds", d.screening.history_rounds},
                    {"temperature", d.screening.temperature},
                    {"coherence_floor", d.screening.coherence_floor},
                    {"omega_cap", d.screening.omega_cap},
                    {"omega_resolution", d.screening.omega_resolution},
                    {"tail_threshold", d.screening.tail_threshold},
                    {"calibrate_per_feature", d.screening.calibrate_per_feature},
                    {"fixed_omega_plus", d.screening.fixed_omega_plus},
                    {"fixed_omega_minus", d.screening.fixed_omega_minus},
                    {"calibration_history_stride", d.screening.calibration_history_stride},
                    {"screen_persona", d.screening.screen_persona},
                    {"prefilter_personas", d.screening.prefilter_personas},
                    {"prefilter_threshold", d.screening.prefilter_threshold}};
  j["sweep"] = {{"feature_id", d.sweep.feature_id},
                {"grid_points", d.sweep.grid_points},
                {"omega_minus", d.sweep.omega_minus},
                {"omega_plus", d.sweep.omega_plus},
                {"temperature", d.sweep.temperature},
                {"persona", d.sweep.persona}};
  j["dashboard"] = {{"feature_id", d.dashboard.feature_id},
                    {"top_k", d.dashboard.top_k},
                    {"histogram_bins", d.dashboard.density.histogram_bins},
                    {"tail_quantile", d.dashboard.density.tail_quantile},
                    {"valley_depth", d.dashboard.density.valley_depth}};
  j["simulate"] = {{"p1", json{{"kind", "model_agent"}, {"temperature", 0.1}}},
                   {"p2", json{{"kind", "random_defector"}, {"p_defect", 0.5}}},
                   {"n_games", d.simulate.n_games},
                   {"rounds_min", d.simulate.rounds_min},
                   {"rounds_max", d.simulate.rounds_max},
                   {"opponent_grid", d.simulate.opponent_grid},
                   {"gmm_k", d.simulate.gmm_k}};
  return j;
}

// Policy records have kind-dependent fields, so they are validated separately.
const std::set<std::string>& policy_keys(const std::string& kind) {
  static const std::map<std::string, std::set<std::string>> allowed = {
      {"random_defector", {"kind", "p_defect"}},
      {"wsls", {"kind", "start"}},
      {"win_stay_lose_change", {"kind", "start"}},
      {"tit_for_tat", {"kind", "start"}},
      {"always", {"kind", "action"}},
      {"model_agent", {"kind", "temperature", "persona", "mode", "steering"}},
  };
  auto it = allowed.find(kind);
  if (it == allowed.end()) throw ConfigError("unknown policy kind: " + kind);
  return it->second;
}

void validate_policy_record(const json& rec, const std::string& where) {
  if (!rec.is_object() || !rec.contains("kind")) {
    throw ConfigError(where + ": policy record needs a \"kind\"");
  }
  const auto& keys = policy_keys(rec["kind"].get<std::string>());
  for (auto it = rec.begin(); it != rec.end(); ++it) {
    if (keys.find(it.key()) == keys.end()) {
      throw ConfigError(where + ": unknown policy key \"" + it.key() + "\"");
    }
  }
  if (rec.contains("steering")) {
    static const std::set<std::string> steer_keys = {"layer", "feature_id", "omega"};
    for (auto it = rec["steering"].begin(); it != rec["steering"].end(); ++it) {
      if (steer_keys.find(it.key()) == steer_keys.end()) {
        throw ConfigError(where + ": unknown steering key \"" + it.key() + "\"");
      }
    }
  }
}

// Rejects keys that do not exist in the schema; recurses into objects.
void check_unknown_keys(const json& user, const json& schema, const std::string& prefix) {
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!schema.contains(it.key())) {
      throw ConfigError("unknown config key: " + path);
    }
    if (path == "simulate.p1" || path == "simulate.p2") {
      validate_policy_record(it.value(), path);
      continue;
    }
    if (it.value().is_object() && schema[it.key()].is_object()) {
      check_unknown_keys(it.value(), schema[it.key()], path);
    }
  }
}

json merged_with_defaults(const json& user) {
  json merged = default_json();
  merged.merge_patch(user);
  // Policy records are tagged unions: a user-provided record replaces the
  // default wholesale instead of inheriting the default's fields.
  if (user.contains("simulate")) {
    for (const char* seat : {"p1", "p2"}) {
      if (user["simulate"].contains(seat)) {
        merged["simulate"][seat] = user["simulate"][seat];
      }
    }
  }
  return merged;
}

// The worker count is an execution detail, not part of the experiment
// identity: results are schedule-independent, so the hash ignores it.
std::string config_hash_of(const json& canonical) {
  json j = canonical;
  j.erase("workers");
  return Sha256::of_string(j.dump());
}

}  // namespace

RunConfig default_run_config() { return parse_run_config(json::object()); }

RunConfig parse_run_config(const json& user) {
  if (!user.is_object()) throw ConfigError("config root must be a JSON object");
  check_unknown_keys(user, default_json(), "");
  json j = merged_with_defaults(user);

  RunConfig cfg;
  try {
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.workers = j.at("workers").get<int>();
    cfg.model_checkpoint = j.at("model_checkpoint").get<std::string>();
    cfg.sae_checkpoint = j.at("sae_checkpoint").get<std::string>();

    const json& c = j.at("corpus");
    cfg.corpus.n_sequences = c.at("n_sequences").get<int>();
    cfg.corpus.rounds_min = c.at("rounds_min").get<int>();
    cfg.corpus.rounds_max = c.at("rounds_max").get<int>();
    cfg.corpus.noise = c.at("noise").get<double>();
    cfg.corpus.persona_mix = c.at("persona_mix").get<double>();
    cfg.corpus.marker_dropout = c.at("marker_dropout").get<double>();
    cfg.corpus.dove_teacher = c.at("dove_teacher").get<std::string>();
    cfg.corpus.hawk_teacher = c.at("hawk_teacher").get<std::string>();

    const json& m = j.at("model");
    cfg.model.n_layers = m.at("n_layers").get<int>();
    cfg.model.d_model = m.at("d_model").get<int>();
    cfg.model.n_heads = m.at("n_heads").get<int>();
    cfg.model.d_ff = m.at("d_ff").get<int>();
    cfg.model.context_window = m.at("context_window").get<int>();
    cfg.model.hook_layer = m.at("hook_layer").get<int>();
    cfg.corpus.context_window = cfg.model.context_window;

    const json& t = j.at("train_lm");
    cfg.train_lm.steps = t.at("steps").get<int>();
    cfg.train_lm.batch = t.at("batch").get<int>();
    cfg.train_lm.lr = t.at("lr").get<double>();
    cfg.train_lm.holdout_fraction = t.at("holdout_fraction").get<double>();
    cfg.train_lm.target_accuracy = t.at("target_accuracy").get<double>();
    cfg.train_lm.eval_every = t.at("eval_every").get<int>();

    cfg.sae_expansion = j.at("sae").at("expansion").get<int>();
    cfg.sae_lambda_l1 = j.at("sae").at("lambda_l1").get<double>();

    const json& ts = j.at("train_sae");
    cfg.train_sae.steps = ts.at("steps").get<int>();
    cfg.train_sae.batch = ts.at("batch").get<int>();
    cfg.train_sae.lr = ts.at("lr").get<double>();
    cfg.train_sae.holdout_fraction = ts.at("holdout_fraction").get<double>();
    cfg.train_sae.eval_every = ts.at("eval_every").get<int>();

    const json& sc = j.at("screening");
    cfg.screening.history_rounds = sc.at("history_rounds").get<int>();
    cfg.screening.temperature = sc.at("temperature").get<double>();
    cfg.screening.coherence_floor = sc.at("coherence_floor").get<double>();
    cfg.screening.omega_cap = sc.at("omega_cap").get<double>();
    cfg.screening.omega_resolution = sc.at("omega_resolution").get<double>();
    cfg.screening.tail_threshold = sc.at("tail_threshold").get<double>();
    cfg.screening.calibrate_per_feature = sc.at("calibrate_per_feature").get<bool>();
    cfg.screening.fixed_omega_plus = sc.at("fixed_omega_plus").get<double>();
    cfg.screening.fixed_omega_minus = sc.at("fixed_omega_minus").get<double>();
    cfg.screening.calibration_history_stride = sc.at("calibration_history_stride").get<int>();
    cfg.screening.screen_persona = sc.at("screen_persona").get<std::string>();
    cfg.screening.prefilter_personas =
        sc.at("prefilter_personas").get<std::vector<std::string>>();
    cfg.screening.prefilter_threshold = sc.at("prefilter_threshold").get<double>();

    const json& sw = j.at("sweep");
    cfg.sweep.feature_id = sw.at("feature_id").get<int>();
    cfg.sweep.grid_points = sw.at("grid_points").get<int>();
    cfg.sweep.omega_minus = sw.at("omega_minus").get<double>();
    cfg.sweep.omega_plus = sw.at("omega_plus").get<double>();
    cfg.sweep.temperature = sw.at("temperature").get<double>();
    cfg.sweep.persona = sw.at("persona").get<std::string>();

    const json& db = j.at("dashboard");
    cfg.dashboard.feature_id = db.at("feature_id").get<int>();
    cfg.dashboard.top_k = db.at("top_k").get<int>();
    cfg.dashboard.density.histogram_bins = db.at("histogram_bins").get<int>();
    cfg.dashboard.density.tail_quantile = db.at("tail_quantile").get<double>();
    cfg.dashboard.density.valley_depth = db.at("valley_depth").get<double>();

    const json& sim = j.at("simulate");
    cfg.simulate.p1 = sim.at("p1");
    cfg.simulate.p2 = sim.at("p2");
    cfg.simulate.n_games = sim.at("n_games").get<int>();
    cfg.simulate.rounds_min = sim.at("rounds_min").get<int>();
    cfg.simulate.rounds_max = sim.at("rounds_max").get<int>();
    cfg.simulate.opponent_grid = sim.at("opponent_grid").get<int>();
    cfg.simulate.gmm_k = sim.at("gmm_k").get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config value error: ") + e.what());
  }

  // Basic range checks beyond what the types enforce.
  if (cfg.corpus.rounds_min < 0 || cfg.corpus.rounds_max < cfg.corpus.rounds_min) {
    throw ConfigError("corpus rounds range invalid");
  }
  if (cfg.screening.history_rounds < 1 || cfg.screening.history_rounds > 8) {
    throw ConfigError("screening.history_rounds must be in [1, 8]");
  }
  if (cfg.sae_expansion < 1) throw ConfigError("sae.expansion must be >= 1");
  if (!(cfg.screening.coherence_floor >= 0.0 && cfg.screening.coherence_floor < 1.0)) {
    throw ConfigError("screening.coherence_floor must be in [0, 1)");
  }

  cfg.canonical = j;
  cfg.hash = config_hash_of(j);
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  if (path.empty()) return default_run_config();
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json user = json::parse(in, nullptr, false);
  if (user.is_discarded()) throw ConfigError("config file is not valid JSON: " + path);
  return parse_run_config(user);
}

void apply_overrides(RunConfig& cfg, std::int64_t seed, int workers, int feature_id) {
  if (seed >= 0) {
    cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.canonical["seed"] = cfg.seed;
  }
  if (workers > 0) {
    cfg.workers = workers;
    cfg.canonical["workers"] = workers;
  }
  if (feature_id >= 0) {
    cfg.sweep.feature_id = feature_id;
    cfg.dashboard.feature_id = feature_id;
    cfg.canonical["sweep"]["feature_id"] = feature_id;
    cfg.canonical["dashboard"]["feature_id"] = feature_id;
  }
  cfg.screening.workers = cfg.workers;
  cfg.train_lm.workers = cfg.workers;
  cfg.train_sae.workers = cfg.workers;
  cfg.hash = config_hash_of(cfg.canonical);
}

PolicyPtr policy_from_json(const json& record, std::shared_ptr<const ToyLm> model,
                           std::shared_ptr<const SaeModel> sae) {
  validate_policy_record(record, "policy");
  const std::string kind = record.at("kind").get<std::string>();
  auto action_of = [](const json& j, const char* key, Action fallback) {
    if (!j.contains(key)) return fallback;
    return action_from_label(j.at(key).get<std::string>());
  };
  try {
    if (kind == "random_defector") {
      return std::make_shared<RandomDefector>(record.value("p_defect", 0.5));
    }
    if (kind == "wsls" || kind == "win_stay_lose_change") {
      return std::make_shared<WinStayLoseChange>(action_of(record, "start", Action::Cooperate));
    }
    if (kind == "tit_for_tat") {
      return std::make_shared<TitForTat>(action_of(record, "start", Action::Cooperate));
    }
    if (kind == "always") {
      if (!record.contains("action")) throw ConfigError("always policy needs \"action\"");
      return std::make_shared<Always>(action_from_label(record.at("action").get<std::string>()));
    }
    if (kind == "model_agent") {
      if (!model) throw ConfigError("model_agent policy requires a model checkpoint");
      ModelAgentOptions opts;
      opts.temperature = record.value("temperature", 0.1);
      opts.persona = persona_from_string(record.value("persona", "anon"));
      opts.strict = record.value("mode", "renormalize") == "strict";
      if (record.contains("steering")) {
        const json& st = record.at("steering");
        SteeringSpec spec;
        spec.layer = st.value("layer", -1);
        spec.feature_id = st.at("feature_id").get<int>();
        spec.omega = st.at("omega").get<double>();
        opts.steering = spec;
        if (!sae) throw ConfigError("steered model_agent requires an SAE checkpoint");
      }
      return std::make_shared<ModelAgent>(std::move(model), std::move(sae), opts);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("policy record error: ") + e.what());
  }
  throw ConfigError("unknown policy kind: " + kind);
}

}  // namespace steerlab
