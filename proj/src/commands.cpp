#include "steerlab/commands.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>

#include "steerlab/agent.hpp"
#include "steerlab/checkpoint.hpp"
#include "steerlab/csv.hpp"
#include "steerlab/parallel.hpp"
#include "steerlab/sha256.hpp"
#include "steerlab/stats.hpp"
#include "steerlab/svg.hpp"

namespace steerlab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class StageTimer {
 public:
  void start() { t0_ = std::chrono::steady_clock::now(); }
  double stop() {
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

class Manifest {
 public:
  Manifest(const RunConfig& cfg, const std::string& command) {
    j_["tool"] = "steerlab";
    j_["version"] = kToolVersion;
    j_["command"] = command;
    j_["config_hash"] = cfg.hash;
    j_["config"] = cfg.canonical;
    j_["seed"] = cfg.seed;
    j_["workers"] = resolve_workers(cfg.workers);
    j_["inputs"] = json::object();
    j_["outputs"] = json::array();
    j_["timings_s"] = json::object();
    j_["metrics"] = json::object();
  }

  void input(const std::string& path) { j_["inputs"][path] = Sha256::of_file(path); }
  void output(const std::string& path) {
    j_["outputs"].push_back({{"path", path},
                             {"sha256", Sha256::of_file(path)},
                             {"bytes", fs::file_size(path)}});
  }
  void timing(const std::string& stage, double seconds) { j_["timings_s"][stage] = seconds; }
  json& metrics() { return j_["metrics"]; }

  void write(const std::string& out_dir) {
    std::ofstream f(out_dir + "/manifest.json", std::ios::trunc);
    if (!f) throw ArtifactError("cannot write manifest in " + out_dir);
    f << j_.dump(2) << "\n";
  }

 private:
  json j_;
};

void write_json(const std::string& path, const json& j) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ArtifactError("cannot write " + path);
  f << j.dump(2) << "\n";
}

std::shared_ptr<const ToyLm> require_model(const RunConfig& cfg) {
  if (cfg.model_checkpoint.empty()) {
    throw ConfigError("model_checkpoint is required for this command");
  }
  if (!fs::exists(cfg.model_checkpoint)) {
    throw ConfigError("model checkpoint not found: " + cfg.model_checkpoint);
  }
  return std::make_shared<ToyLm>(load_toy_lm(cfg.model_checkpoint));
}

std::shared_ptr<const SaeModel> require_sae(const RunConfig& cfg) {
  if (cfg.sae_checkpoint.empty()) {
    throw ConfigError("sae_checkpoint is required for this command");
  }
  if (!fs::exists(cfg.sae_checkpoint)) {
    throw ConfigError("sae checkpoint not found: " + cfg.sae_checkpoint);
  }
  return std::make_shared<SaeModel>(load_sae(cfg.sae_checkpoint));
}

std::vector<std::vector<TokenId>> corpus_token_sequences(const TranscriptCorpus& corpus) {
  std::vector<std::vector<TokenId>> seqs;
  seqs.reserve(corpus.sequences.size());
  for (const Transcript& t : corpus.sequences) seqs.push_back(t.tokens);
  return seqs;
}

// ---------------------------------------------------------------------------
// Plot builders
// ---------------------------------------------------------------------------

void plot_delta_histogram(const std::string& path, const ScreeningReport& report) {
  const int bins = 41;
  std::vector<int> counts(bins, 0);
  for (const DeltaRecord& r : report.records) {
    int b = static_cast<int>((r.delta + 1.0) / 2.0 * bins);
    b = std::clamp(b, 0, bins - 1);
    ++counts[static_cast<std::size_t>(b)];
  }
  int max_count = 1;
  for (int c : counts) max_count = std::max(max_count, c);

  Svg svg(520, 340);
  Axes ax(&svg, 60, 20, 430, 270, -1.0, 1.0, 0.0, static_cast<double>(max_count));
  ax.frame("delta", "features", 4, 5);
  const double bw = 2.0 / bins;
  for (int b = 0; b < bins; ++b) {
    const double x0 = -1.0 + b * bw;
    const int c = counts[static_cast<std::size_t>(b)];
    if (c == 0) continue;
    svg.rect(ax.x(x0), ax.y(c), ax.x(x0 + bw) - ax.x(x0), ax.y(0) - ax.y(c), "#4878b0");
  }
  svg.line(ax.x(0.0), ax.y(0.0), ax.x(0.0), 20.0, "#999999", 1.0);
  svg.write(path);
}

void plot_strategy_area(const std::string& path, const StrategyArea& area) {
  Svg svg(460, 440);
  Axes ax(&svg, 60, 20, 360, 360, 0.0, 1.0, 0.0, 1.0);
  ax.frame("P(blue | +steering)", "P(blue | -steering)", 5, 5);
  if (area.hull.size() >= 3) {
    std::vector<std::pair<double, double>> hull_px;
    for (const auto& [x, y] : area.hull) hull_px.push_back({ax.x(x), ax.y(y)});
    svg.polygon(hull_px, "#b0c8e833", "#4878b0", 1.5);
  }
  for (const auto& [x, y] : area.points) svg.circle(ax.x(x), ax.y(y), 2.0, "#333333");
  svg.circle(ax.x(area.center.first), ax.y(area.center.second), 4.0, "#c03028");
  char buf[64];
  std::snprintf(buf, sizeof(buf), "area = %.4f", area.area);
  svg.text(70, 36, buf, 11.0);
  svg.write(path);
}

// Fig-3 style stacked panels: +steered / unsteered / -steered mean P(blue)
// per (p1 defections, p2 defections) cell.
void plot_feature_grids(const std::string& path, const DeltaRecord& rec,
                        const std::vector<GameHistory>& histories, int rounds) {
  const int n = rounds + 1;  // defection counts 0..rounds
  auto cell_means = [&](const std::vector<double>& grid) {
    std::vector<double> sum(static_cast<std::size_t>(n * n), 0.0);
    std::vector<int> cnt(static_cast<std::size_t>(n * n), 0);
    for (std::size_t i = 0; i < histories.size(); ++i) {
      const int d1 = defection_count(histories[i], 1);
      const int d2 = defection_count(histories[i], 2);
      sum[static_cast<std::size_t>(d1 * n + d2)] += grid[i];
      ++cnt[static_cast<std::size_t>(d1 * n + d2)];
    }
    for (int i = 0; i < n * n; ++i) {
      if (cnt[static_cast<std::size_t>(i)] > 0) {
        sum[static_cast<std::size_t>(i)] /= cnt[static_cast<std::size_t>(i)];
      }
    }
    return sum;
  };

  const double cell = 34.0;
  const double panel_h = n * cell + 34.0;
  Svg svg(80 + n * cell + 120, 3 * panel_h + 20);
  const char* titles[3] = {"+steered", "unsteered", "-steered"};
  const std::vector<double>* grids[3] = {&rec.grid_plus, &rec.grid_zero, &rec.grid_minus};
  for (int p = 0; p < 3; ++p) {
    const double oy = 20 + p * panel_h;
    svg.text(60, oy - 4, titles[p], 11.0);
    std::vector<double> means = cell_means(*grids[p]);
    for (int d1 = 0; d1 < n; ++d1) {
      for (int d2 = 0; d2 < n; ++d2) {
        const double v = means[static_cast<std::size_t>(d1 * n + d2)];
        // rows: p2 defections bottom-up; cols: p1 defections left-right
        const double x = 60 + d1 * cell;
        const double y = oy + (n - 1 - d2) * cell;
        svg.rect(x, y, cell - 2, cell - 2, heat_color(v), "#ffffff", 0.5);
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%.2f", v);
        svg.text(x + cell / 2 - 1, y + cell / 2 + 3, buf, 8.5, "middle");
      }
    }
    for (int d = 0; d < n; ++d) {
      svg.text(60 + d * cell + cell / 2, oy + n * cell + 12, std::to_string(d), 9.0, "middle");
      svg.text(50, oy + (n - 1 - d) * cell + cell / 2 + 3, std::to_string(d), 9.0, "end");
    }
    svg.text(60 + n * cell / 2, oy + n * cell + 26, "P1 defections", 10.0, "middle");
    svg.text(14, oy + 12, "P2", 10.0);
  }
  svg.write(path);
}

void plot_density(const std::string& path, const ActivationDensity& density) {
  Svg svg(520, 340);
  if (density.counts.empty()) {
    svg.text(40, 60, "degenerate: feature never activates", 12.0);
    svg.write(path);
    return;
  }
  long max_count = 1;
  for (long c : density.counts) max_count = std::max(max_count, c);
  const double x_max = density.bin_edges.back();
  Axes ax(&svg, 60, 20, 430, 270, 0.0, x_max, 0.0, static_cast<double>(max_count));
  ax.frame("activation", "count", 5, 5);
  for (std::size_t b = 0; b < density.counts.size(); ++b) {
    const long c = density.counts[b];
    if (c == 0) continue;
    const double x0 = density.bin_edges[b];
    const double x1 = density.bin_edges[b + 1];
    svg.rect(ax.x(x0), ax.y(static_cast<double>(c)), ax.x(x1) - ax.x(x0),
             ax.y(0) - ax.y(static_cast<double>(c)), "#6a9a48");
  }
  svg.text(70, 36, std::string("class: ") + density_class_name(density.cls), 11.0);
  svg.write(path);
}

void plot_sweep_overlay(const std::string& path, const std::vector<SweepCurve>& curves) {
  double omega_lo = 0.0, omega_hi = 0.0;
  for (const SweepCurve& c : curves) {
    omega_lo = std::min(omega_lo, c.omegas.front());
    omega_hi = std::max(omega_hi, c.omegas.back());
  }
  Svg svg(560, 380);
  Axes ax(&svg, 60, 20, 470, 300, omega_lo, omega_hi, 0.0, 1.0);
  ax.frame("omega", "P(defect)", 6, 5);
  for (const SweepCurve& c : curves) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < c.omegas.size(); ++i) {
      pts.push_back({ax.x(c.omegas[i]), ax.y(c.p_defect[i])});
    }
    svg.polyline(pts, "#4878b077", 1.0);
  }
  svg.line(ax.x(0.0), ax.y(0.0), ax.x(0.0), 20.0, "#999999", 1.0);
  svg.write(path);
}

void plot_simulate_scatter(const std::string& path,
                           const std::vector<std::pair<double, double>>& pts,
                           const LogisticFit& fit) {
  Svg svg(520, 420);
  Axes ax(&svg, 60, 20, 420, 340, 0.0, 1.0, 0.0, 1.0);
  ax.frame("p2 defection probability", "p1 defection probability", 5, 5);
  for (const auto& [x, y] : pts) svg.circle(ax.x(x), ax.y(y), 2.2, "#33333399");
  std::vector<std::pair<double, double>> curve;
  for (int i = 0; i <= 100; ++i) {
    const double x = i / 100.0;
    curve.push_back({ax.x(x), ax.y(std::clamp(logistic4(fit, x), 0.0, 1.0))});
  }
  svg.polyline(curve, "#c03028", 1.8);
  char buf[80];
  std::snprintf(buf, sizeof(buf), "4PL fit: r^2 = %.3f", fit.r_squared);
  svg.text(70, 36, buf, 11.0);
  svg.write(path);
}

void plot_score_per_turn(const std::string& path,
                         const std::vector<std::pair<double, double>>& pts) {
  double y_max = 5.0;
  for (const auto& [x, y] : pts) y_max = std::max(y_max, y);
  Svg svg(520, 380);
  Axes ax(&svg, 60, 20, 420, 300, 0.0, 1.0, 0.0, y_max);
  ax.frame("p2 defection probability", "p1 score per turn ($)", 5, 5);
  for (const auto& [x, y] : pts) svg.circle(ax.x(x), ax.y(y), 2.2, "#6a9a48");
  svg.write(path);
}

void plot_gmm_clusters(const std::string& path,
                       const std::vector<std::vector<double>>& pts, const GmmModel& gmm) {
  static const char* colors[6] = {"#4878b0", "#c03028", "#6a9a48",
                                  "#9467bd", "#e3a03a", "#444444"};
  Svg svg(520, 420);
  Axes ax(&svg, 60, 20, 420, 340, 0.0, 1.0, 0.0, 1.0);
  ax.frame("p2 defection probability", "p1 defection probability", 5, 5);
  for (const auto& p : pts) {
    const std::vector<double> resp = gmm.responsibilities(p);
    std::size_t best = 0;
    for (std::size_t c = 1; c < resp.size(); ++c) {
      if (resp[c] > resp[best]) best = c;
    }
    svg.circle(ax.x(p[0]), ax.y(p[1]), 2.2, colors[best % 6]);
  }
  for (std::size_t c = 0; c < gmm.components.size(); ++c) {
    const auto& comp = gmm.components[c];
    svg.circle(ax.x(comp.mean[0]), ax.y(comp.mean[1]), 5.0, "none");
    svg.line(ax.x(comp.mean[0]) - 5, ax.y(comp.mean[1]), ax.x(comp.mean[0]) + 5,
             ax.y(comp.mean[1]), colors[c % 6], 2.0);
    svg.line(ax.x(comp.mean[0]), ax.y(comp.mean[1]) - 5, ax.x(comp.mean[0]),
             ax.y(comp.mean[1]) + 5, colors[c % 6], 2.0);
  }
  svg.write(path);
}

}  // namespace

std::string resolve_out_dir(const RunConfig& cfg, const std::string& explicit_out,
                            const std::string& command) {
  fs::path dir;
  if (!explicit_out.empty()) {
    dir = explicit_out;
  } else {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char stamp[32];
    std::tm tm_buf{};
    gmtime_r(&t, &tm_buf);
    std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm_buf);
    dir = fs::path("steerlab-runs") /
          (command + "-" + cfg.hash.substr(0, 12) + "-" + stamp);
    int suffix = 1;
    fs::path candidate = dir;
    while (fs::exists(candidate)) {
      candidate = dir;
      candidate += "-" + std::to_string(suffix++);
    }
    dir = candidate;
  }
  fs::create_directories(dir);
  return dir.string();
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

void cmd_train(const RunConfig& cfg, const std::string& out_dir) {
  Manifest manifest(cfg, "train");
  StageTimer timer;
  Rng rng(cfg.seed);

  timer.start();
  TranscriptCorpus corpus = generate_corpus(cfg.corpus, rng.derive(0xc0de0001ULL));
  manifest.timing("corpus", timer.stop());

  timer.start();
  const std::string model_path = out_dir + "/model.ckpt";
  LmTrainResult lm;
  try {
    lm = train_toy_lm(corpus, cfg.model, cfg.train_lm, rng.derive(0xc0de0002ULL),
                      [&](const ToyLm& last_good) {
                        save_toy_lm(out_dir + "/model.last_good.ckpt", last_good);
                      });
  } catch (const TrainingError& e) {
    throw TrainingError(e.what(), out_dir + "/model.last_good.ckpt");
  }
  manifest.timing("train_lm", timer.stop());
  save_toy_lm(model_path, lm.model);

  CsvWriter lm_trace({"step", "train_loss", "heldout_loss", "heldout_accuracy"});
  for (const TrainTracePoint& p : lm.trace) {
    lm_trace.append_row({std::to_string(p.step), csv_double(p.train_loss),
                         csv_double(p.heldout_loss), csv_double(p.heldout_accuracy)});
  }
  lm_trace.write(out_dir + "/train_lm_trace.csv");

  timer.start();
  ActivationSet acts = collect_activations(lm.model, corpus_token_sequences(corpus),
                                           cfg.model.resolved_hook_layer(), cfg.workers);
  manifest.timing("collect_activations", timer.stop());

  timer.start();
  const int d_latent = cfg.sae_expansion * cfg.model.d_model;
  SaeTrainResult sae =
      train_sae(acts, d_latent, cfg.sae_lambda_l1, cfg.train_sae, rng.derive(0xc0de0003ULL));
  manifest.timing("train_sae", timer.stop());
  const std::string sae_path = out_dir + "/sae.ckpt";
  save_sae(sae_path, sae.sae);

  CsvWriter sae_trace({"step", "train_loss", "heldout_recon", "heldout_active"});
  for (const SaeTracePoint& p : sae.trace) {
    sae_trace.append_row({std::to_string(p.step), csv_double(p.train_loss),
                          csv_double(p.heldout_recon), csv_double(p.heldout_active)});
  }
  sae_trace.write(out_dir + "/train_sae_trace.csv");

  json& metrics = manifest.metrics();
  metrics["lm_initial_heldout_loss"] = lm.initial_heldout_loss;
  metrics["lm_final_heldout_loss"] = lm.final_heldout_loss;
  metrics["lm_final_action_accuracy"] = lm.final_action_accuracy;
  metrics["lm_target_accuracy"] = cfg.train_lm.target_accuracy;
  metrics["lm_target_met"] = lm.final_action_accuracy >= cfg.train_lm.target_accuracy;
  metrics["sae_initial_heldout_recon"] = sae.initial_heldout_recon;
  metrics["sae_final_heldout_recon"] = sae.final_heldout_recon;
  metrics["sae_final_heldout_active"] = sae.final_heldout_active;
  metrics["activation_rows"] = acts.size();

  manifest.output(model_path);
  manifest.output(sae_path);
  manifest.output(out_dir + "/train_lm_trace.csv");
  manifest.output(out_dir + "/train_sae_trace.csv");
  manifest.write(out_dir);
}

// ---------------------------------------------------------------------------
// screen
// ---------------------------------------------------------------------------

void cmd_screen(const RunConfig& cfg, const std::string& out_dir) {
  Manifest manifest(cfg, "screen");
  StageTimer timer;

  std::shared_ptr<const ToyLm> model = require_model(cfg);
  std::shared_ptr<const SaeModel> sae = require_sae(cfg);
  manifest.input(cfg.model_checkpoint);
  manifest.input(cfg.sae_checkpoint);

  Rng rng(cfg.seed);
  timer.start();
  TranscriptCorpus corpus = generate_corpus(cfg.corpus, rng.derive(0xc0de0001ULL));
  ActivationSet acts = collect_activations(*model, corpus_token_sequences(corpus),
                                           model->cfg.resolved_hook_layer(), cfg.workers);
  manifest.timing("collect_activations", timer.stop());

  timer.start();
  ScreeningConfig scfg = cfg.screening;
  scfg.workers = cfg.workers;
  ScreeningReport report = screen_all(*model, *sae, scfg, &acts);
  report.model_digest = Sha256::of_file(cfg.model_checkpoint);
  report.sae_digest = Sha256::of_file(cfg.sae_checkpoint);
  manifest.timing("screen_all", timer.stop());

  // Flat CSV mirroring the notable-features table layout.
  CsvWriter csv({"feature_id", "p_plus", "p_minus", "delta", "coherence_plus",
                 "coherence_minus", "omega_plus", "omega_minus", "monotone_fraction"});
  for (const DeltaRecord& r : report.records) {
    csv.append_row({std::to_string(r.feature_id), csv_double(r.p_plus), csv_double(r.p_minus),
                    csv_double(r.delta), csv_double(r.coherence_plus),
                    csv_double(r.coherence_minus), csv_double(r.omega_plus),
                    csv_double(r.omega_minus), csv_double(r.monotone_fraction)});
  }
  const std::string csv_path = out_dir + "/report.csv";
  csv.write(csv_path);

  // Full JSON report with the per-history grids.
  json jreport;
  jreport["model_digest"] = report.model_digest;
  jreport["sae_digest"] = report.sae_digest;
  jreport["config_hash"] = cfg.hash;
  jreport["n_features"] = report.n_features;
  jreport["prefiltered_count"] = report.prefiltered_count;
  jreport["dead_count"] = report.dead_count;
  jreport["dead_features"] = report.dead_features;
  jreport["baseline_mean_p_blue"] = report.baseline_mean_p_blue;
  jreport["baseline_grid"] = report.baseline_grid;
  jreport["history_ids"] = report.history_ids;
  json jrecords = json::array();
  for (const DeltaRecord& r : report.records) {
    jrecords.push_back({{"feature_id", r.feature_id},
                        {"omega_plus", r.omega_plus},
                        {"omega_minus", r.omega_minus},
                        {"p_plus", r.p_plus},
                        {"p_minus", r.p_minus},
                        {"delta", r.delta},
                        {"p_plus_renorm", r.p_plus_renorm},
                        {"p_minus_renorm", r.p_minus_renorm},
                        {"coherence_plus", r.coherence_plus},
                        {"coherence_minus", r.coherence_minus},
                        {"monotone_fraction", r.monotone_fraction},
                        {"grid_plus", r.grid_plus},
                        {"grid_zero", r.grid_zero},
                        {"grid_minus", r.grid_minus}});
  }
  jreport["records"] = jrecords;
  const std::string json_path = out_dir + "/report.json";
  write_json(json_path, jreport);

  // Plots.
  plot_delta_histogram(out_dir + "/delta_histogram.svg", report);

  std::vector<std::pair<double, double>> pp;
  for (const DeltaRecord& r : report.records) pp.push_back({r.p_plus, r.p_minus});
  std::vector<std::string> plot_paths = {out_dir + "/delta_histogram.svg"};
  if (pp.size() >= 3) {
    StrategyArea area = strategy_area(pp, report.baseline_mean_p_blue);
    plot_strategy_area(out_dir + "/strategy_area.svg", area);
    plot_paths.push_back(out_dir + "/strategy_area.svg");
    manifest.metrics()["strategy_area"] = area.area;
  }
  std::vector<GameHistory> histories = enumerate_histories(scfg.history_rounds);
  std::vector<DeltaRecord> tail = tail_features(report, scfg.tail_threshold);
  const std::size_t max_grid_plots = 8;
  for (std::size_t i = 0; i < tail.size() && i < max_grid_plots; ++i) {
    const std::string path =
        out_dir + "/grids_feature_" + std::to_string(tail[i].feature_id) + ".svg";
    plot_feature_grids(path, tail[i], histories, scfg.history_rounds);
    plot_paths.push_back(path);
  }

  json& metrics = manifest.metrics();
  metrics["prefiltered_count"] = report.prefiltered_count;
  metrics["dead_count"] = report.dead_count;
  metrics["screened_count"] = report.records.size();
  metrics["baseline_mean_p_blue"] = report.baseline_mean_p_blue;
  metrics["tail_count"] = tail.size();

  manifest.output(csv_path);
  manifest.output(json_path);
  for (const std::string& p : plot_paths) manifest.output(p);
  manifest.write(out_dir);
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

void cmd_simulate(const RunConfig& cfg, const std::string& out_dir) {
  Manifest manifest(cfg, "simulate");
  StageTimer timer;

  std::shared_ptr<const ToyLm> model;
  std::shared_ptr<const SaeModel> sae;
  const bool needs_model = cfg.simulate.p1.value("kind", "") == "model_agent" ||
                           cfg.simulate.p2.value("kind", "") == "model_agent";
  if (needs_model) {
    model = require_model(cfg);
    manifest.input(cfg.model_checkpoint);
    const bool steered = cfg.simulate.p1.contains("steering") ||
                         cfg.simulate.p2.contains("steering");
    if (steered) {
      sae = require_sae(cfg);
      manifest.input(cfg.sae_checkpoint);
    }
  }
  PolicyPtr p1 = policy_from_json(cfg.simulate.p1, model, sae);
  PolicyPtr p2_template = policy_from_json(cfg.simulate.p2, model, sae);

  // Against a random defector, sweep its defection probability over a grid.
  const bool sweep_opponent =
      cfg.simulate.p2.value("kind", "") == "random_defector" && cfg.simulate.opponent_grid > 1;

  struct GameRow {
    double p2_defect = 0.0;
    double p1_defect = 0.0;
    int rounds = 0;
    Cents score1 = 0;
    Cents score2 = 0;
    bool failed = false;
    std::string error;
  };
  const int n_games = cfg.simulate.n_games;
  if (n_games < 1) throw ConfigError("simulate.n_games must be >= 1");
  std::vector<GameRow> rows(static_cast<std::size_t>(n_games));

  Rng rng(cfg.seed);
  timer.start();
  parallel_for(static_cast<std::size_t>(n_games), cfg.workers, [&](std::size_t g, int) {
    GameRow& row = rows[g];
    Rng game_rng = rng.derive(0x3a3e0000ULL + g);
    PolicyPtr p2 = p2_template;
    if (sweep_opponent) {
      row.p2_defect = static_cast<double>(g % static_cast<std::size_t>(cfg.simulate.opponent_grid)) /
                      (cfg.simulate.opponent_grid - 1);
      p2 = std::make_shared<RandomDefector>(row.p2_defect);
    } else if (cfg.simulate.p2.value("kind", "") == "random_defector") {
      row.p2_defect = cfg.simulate.p2.value("p_defect", 0.5);
    }
    const int rounds =
        cfg.simulate.rounds_min == cfg.simulate.rounds_max
            ? cfg.simulate.rounds_min
            : game_rng.uniform_int(cfg.simulate.rounds_min, cfg.simulate.rounds_max);
    try {
      GameHistory h = play_game(*p1, *p2, rounds, game_rng.derive(0x67616d65ULL));
      row.rounds = h.length();
      row.p1_defect = static_cast<double>(defection_count(h, 1)) / h.length();
      row.score1 = h.score(1);
      row.score2 = h.score(2);
    } catch (const PolicyError& e) {
      row.failed = true;
      row.error = e.what();
    }
  });
  manifest.timing("games", timer.stop());

  for (const GameRow& row : rows) {
    if (row.failed) throw PolicyError(row.error);
  }

  CsvWriter csv({"p2_defect", "p1_defect", "rounds", "score1_cents", "score2_cents"});
  std::vector<std::pair<double, double>> scatter;
  std::vector<std::pair<double, double>> score_pts;
  std::vector<std::vector<double>> gmm_pts;
  for (const GameRow& row : rows) {
    csv.append_row({csv_double(row.p2_defect), csv_double(row.p1_defect),
                    std::to_string(row.rounds), std::to_string(row.score1),
                    std::to_string(row.score2)});
    scatter.push_back({row.p2_defect, row.p1_defect});
    score_pts.push_back(
        {row.p2_defect, static_cast<double>(row.score1) / (100.0 * row.rounds)});
    gmm_pts.push_back({row.p2_defect, row.p1_defect});
  }
  const std::string csv_path = out_dir + "/games.csv";
  csv.write(csv_path);

  LogisticFit fit = logistic_fit(scatter);
  json jfit;
  jfit["lower"] = fit.lower;
  jfit["upper"] = fit.upper;
  jfit["slope"] = fit.slope;
  jfit["midpoint"] = fit.midpoint;
  jfit["r_squared"] = fit.r_squared;
  jfit["zero_variance"] = fit.zero_variance;
  write_json(out_dir + "/logistic_fit.json", jfit);

  plot_simulate_scatter(out_dir + "/defection_scatter.svg", scatter, fit);
  plot_score_per_turn(out_dir + "/score_per_turn.svg", score_pts);

  GmmModel gmm = gmm_fit(gmm_pts, cfg.simulate.gmm_k, rng.derive(0x676d6d00ULL));
  plot_gmm_clusters(out_dir + "/gmm_clusters.svg", gmm_pts, gmm);

  json& metrics = manifest.metrics();
  metrics["n_games"] = n_games;
  metrics["logistic_r_squared"] = fit.r_squared;
  metrics["gmm_log_likelihood"] = gmm.log_likelihood;
  metrics["gmm_iterations"] = gmm.iterations;

  manifest.output(csv_path);
  manifest.output(out_dir + "/logistic_fit.json");
  manifest.output(out_dir + "/defection_scatter.svg");
  manifest.output(out_dir + "/score_per_turn.svg");
  manifest.output(out_dir + "/gmm_clusters.svg");
  manifest.write(out_dir);
}

// ---------------------------------------------------------------------------
// dashboard
// ---------------------------------------------------------------------------

void cmd_dashboard(const RunConfig& cfg, const std::string& out_dir) {
  Manifest manifest(cfg, "dashboard");
  if (cfg.dashboard.feature_id < 0) {
    throw ConfigError("dashboard requires a feature id (--feature or dashboard.feature_id)");
  }
  std::shared_ptr<const ToyLm> model = require_model(cfg);
  std::shared_ptr<const SaeModel> sae = require_sae(cfg);
  manifest.input(cfg.model_checkpoint);
  manifest.input(cfg.sae_checkpoint);
  if (cfg.dashboard.feature_id >= sae->d_latent) {
    throw ConfigError("dashboard.feature_id out of range");
  }

  Rng rng(cfg.seed);
  StageTimer timer;
  timer.start();
  TranscriptCorpus corpus = generate_corpus(cfg.corpus, rng.derive(0xc0de0001ULL));
  std::vector<std::vector<TokenId>> seqs = corpus_token_sequences(corpus);
  ActivationSet acts =
      collect_activations(*model, seqs, model->cfg.resolved_hook_layer(), cfg.workers);
  manifest.timing("collect_activations", timer.stop());

  timer.start();
  FeatureDossier dossier =
      top_activations(*sae, cfg.dashboard.feature_id, acts, seqs, cfg.dashboard.top_k,
                      game_vocabulary(), cfg.dashboard.density);
  manifest.timing("dossier", timer.stop());

  const std::string base = out_dir + "/dashboard_feature_" +
                           std::to_string(cfg.dashboard.feature_id);
  json j;
  j["feature_id"] = dossier.feature_id;
  j["class"] = density_class_name(dossier.density.cls);
  j["degenerate"] = dossier.density.cls == DensityClass::Degenerate;
  j["nonzero_fraction"] = dossier.density.nonzero_fraction;
  j["n_positive"] = dossier.density.n_positive;
  j["n_total"] = dossier.density.n_total;
  j["max_activation"] = dossier.density.max_activation;
  j["bin_edges"] = dossier.density.bin_edges;
  j["counts"] = dossier.density.counts;
  j["truncated"] = dossier.truncated;
  json jtop = json::array();
  for (const TopActivation& t : dossier.top) {
    jtop.push_back({{"seq", t.seq},
                    {"pos", t.pos},
                    {"token", game_vocabulary().token(t.token)},
                    {"activation", t.activation},
                    {"context", t.context}});
  }
  j["top_activations"] = jtop;
  write_json(base + ".json", j);

  CsvWriter csv({"rank", "seq", "pos", "token", "activation", "context"});
  for (std::size_t i = 0; i < dossier.top.size(); ++i) {
    const TopActivation& t = dossier.top[i];
    csv.append_row({std::to_string(i + 1), std::to_string(t.seq), std::to_string(t.pos),
                    game_vocabulary().token(t.token), csv_double(t.activation),
                    "\"" + t.context + "\""});
  }
  csv.write(base + "_top.csv");

  plot_density(base + ".svg", dossier.density);

  manifest.metrics()["class"] = density_class_name(dossier.density.cls);
  manifest.metrics()["n_positive"] = dossier.density.n_positive;
  manifest.output(base + ".json");
  manifest.output(base + "_top.csv");
  manifest.output(base + ".svg");
  manifest.write(out_dir);
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

void cmd_sweep(const RunConfig& cfg, const std::string& out_dir) {
  Manifest manifest(cfg, "sweep");
  if (cfg.sweep.feature_id < 0) {
    throw ConfigError("sweep requires a feature id (--feature or sweep.feature_id)");
  }
  std::shared_ptr<const ToyLm> model = require_model(cfg);
  std::shared_ptr<const SaeModel> sae = require_sae(cfg);
  manifest.input(cfg.model_checkpoint);
  manifest.input(cfg.sae_checkpoint);
  if (cfg.sweep.feature_id >= sae->d_latent) throw ConfigError("sweep.feature_id out of range");

  const Persona persona = persona_from_string(cfg.sweep.persona);
  std::vector<GameHistory> histories = enumerate_histories(cfg.screening.history_rounds);

  double omega_minus = cfg.sweep.omega_minus;
  double omega_plus = cfg.sweep.omega_plus;
  StageTimer timer;
  if (omega_minus == 0.0 && omega_plus == 0.0) {
    timer.start();
    PrefixCache cache = build_prefix_cache(*model, histories, persona,
                                           model->cfg.resolved_hook_layer(), cfg.workers);
    auto [lo, hi] = calibrate_omega(*model, *sae, cfg.sweep.feature_id, cache,
                                    cfg.screening.coherence_floor, cfg.screening.omega_cap,
                                    cfg.screening.omega_resolution, cfg.sweep.temperature);
    omega_minus = lo;
    omega_plus = hi;
    manifest.timing("calibrate", timer.stop());
  }
  if (omega_minus == 0.0 && omega_plus == 0.0) {
    // Degenerate calibration; sweep a symmetric unit range so the output is
    // still well-formed, flagged in the manifest.
    omega_minus = -1.0;
    omega_plus = 1.0;
    manifest.metrics()["calibration_degenerate"] = true;
  }
  std::vector<double> grid = make_omega_grid(omega_minus, omega_plus, cfg.sweep.grid_points);

  timer.start();
  std::vector<SweepCurve> curves(histories.size());
  parallel_for(histories.size(), cfg.workers, [&](std::size_t i, int) {
    curves[i] = sweep(*model, *sae, histories[i], cfg.sweep.feature_id, grid,
                      cfg.sweep.temperature, persona);
  });
  manifest.timing("sweep", timer.stop());

  CsvWriter csv({"history_id", "omega", "p_defect", "coherence"});
  for (const SweepCurve& c : curves) {
    for (std::size_t i = 0; i < c.omegas.size(); ++i) {
      csv.append_row({c.history_id, csv_double(c.omegas[i]), csv_double(c.p_defect[i]),
                      csv_double(c.coherence[i])});
    }
  }
  const std::string csv_path =
      out_dir + "/sweep_feature_" + std::to_string(cfg.sweep.feature_id) + ".csv";
  csv.write(csv_path);

  const std::string svg_path =
      out_dir + "/sweep_feature_" + std::to_string(cfg.sweep.feature_id) + ".svg";
  plot_sweep_overlay(svg_path, curves);

  json& metrics = manifest.metrics();
  metrics["feature_id"] = cfg.sweep.feature_id;
  metrics["omega_minus"] = omega_minus;
  metrics["omega_plus"] = omega_plus;
  metrics["grid_points"] = grid.size();
  metrics["monotone_fraction"] = monotonicity_score(curves);

  manifest.output(csv_path);
  manifest.output(svg_path);
  manifest.write(out_dir);
}

}  // namespace steerlab
