#include "steerlab/screening.hpp"

#include <algorithm>
#include <cmath>

#include "steerlab/errors.hpp"
#include "steerlab/parallel.hpp"

namespace steerlab {

namespace {

double mean_coherence_at(const ToyLm& m, const PrefixCache& cache,
                         const std::vector<double>& dir, double omega, double temperature) {
  double total = 0.0;
  for (const Mat& r : cache.residuals) {
    total += steered_readout(m, r, cache.boundary, dir, omega, temperature).coherence;
  }
  return total / static_cast<double>(cache.residuals.size());
}

PrefixCache strided_subset(const PrefixCache& cache, int stride) {
  if (stride <= 1) return cache;
  PrefixCache out;
  out.boundary = cache.boundary;
  for (std::size_t i = 0; i < cache.residuals.size(); i += static_cast<std::size_t>(stride)) {
    out.residuals.push_back(cache.residuals[i]);
    out.history_ids.push_back(cache.history_ids[i]);
  }
  return out;
}

bool monotone_within(const std::vector<double>& ys, double tol) {
  bool non_increasing = true;
  bool non_decreasing = true;
  for (std::size_t i = 1; i < ys.size(); ++i) {
    const double d = ys[i] - ys[i - 1];
    if (d > tol) non_increasing = false;
    if (d < -tol) non_decreasing = false;
  }
  return non_increasing || non_decreasing;
}

}  // namespace

std::set<int> prompt_active_features(const ToyLm& m, const SaeModel& s,
                                     const std::vector<std::vector<TokenId>>& prompts,
                                     double threshold) {
  if (prompts.empty()) throw InputError("prompt_active_features: no prompts");
  const int boundary = m.cfg.resolved_hook_layer();
  std::set<int> active;
  for (const std::vector<TokenId>& prompt : prompts) {
    ForwardResult fr = forward(m, prompt);
    const Mat& r = fr.residuals[static_cast<std::size_t>(boundary)];
    for (int pos = 0; pos < r.rows; ++pos) {
      std::vector<double> f = encode(s, r.row(pos));
      for (int j = 0; j < s.d_latent; ++j) {
        if (f[static_cast<std::size_t>(j)] > threshold) active.insert(j);
      }
    }
  }
  return active;
}

std::pair<double, double> calibrate_omega(const ToyLm& m, const SaeModel& s, int feature_id,
                                          const PrefixCache& cache, double coherence_floor,
                                          double omega_cap, double omega_resolution,
                                          double temperature) {
  if (!(coherence_floor >= 0.0 && coherence_floor < 1.0)) {
    throw InputError("calibrate_omega: coherence_floor must be in [0, 1)");
  }
  const std::vector<double> dir = s.decoder_column(feature_id);
  auto coherent = [&](double omega) {
    return mean_coherence_at(m, cache, dir, omega, temperature) >= coherence_floor;
  };

  auto search = [&](double sign) -> double {
    if (coherent(sign * omega_cap)) return sign * omega_cap;
    if (!coherent(sign * omega_resolution)) return 0.0;
    // Doubling to bracket the breakdown, then bisection to resolution.
    double lo = omega_resolution;
    double hi = omega_cap;
    double probe = omega_resolution * 2.0;
    while (probe < omega_cap) {
      if (coherent(sign * probe)) {
        lo = probe;
        probe *= 2.0;
      } else {
        hi = probe;
        break;
      }
    }
    while (hi - lo > omega_resolution) {
      const double mid = 0.5 * (lo + hi);
      if (coherent(sign * mid)) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return sign * lo;
  };

  const double plus = search(1.0);
  const double minus = search(-1.0);
  return {minus, plus};
}

DeltaRecord screen_feature(const ToyLm& m, const SaeModel& s, int feature_id,
                           double omega_plus, double omega_minus, const PrefixCache& cache,
                           const std::vector<ActionReadout>& baseline, double temperature) {
  const std::size_t n = cache.residuals.size();
  if (baseline.size() != n) throw InputError("screen_feature: baseline size mismatch");
  const std::vector<double> dir = s.decoder_column(feature_id);

  DeltaRecord rec;
  rec.feature_id = feature_id;
  rec.omega_plus = omega_plus;
  rec.omega_minus = omega_minus;
  rec.grid_plus.resize(n);
  rec.grid_zero.resize(n);
  rec.grid_minus.resize(n);

  double renorm_plus = 0.0, renorm_minus = 0.0;
  int monotone = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const ActionReadout plus =
        steered_readout(m, cache.residuals[i], cache.boundary, dir, omega_plus, temperature);
    const ActionReadout minus =
        steered_readout(m, cache.residuals[i], cache.boundary, dir, omega_minus, temperature);
    const ActionReadout& zero = baseline[i];

    rec.grid_plus[i] = plus.p_blue;
    rec.grid_zero[i] = zero.p_blue;
    rec.grid_minus[i] = minus.p_blue;
    rec.p_plus += plus.p_blue;
    rec.p_minus += minus.p_blue;
    renorm_plus += plus.p_defect_renorm;
    renorm_minus += minus.p_defect_renorm;
    rec.coherence_plus += plus.coherence;
    rec.coherence_minus += minus.coherence;
    // Three-point curve in omega order (omega_minus <= 0 <= omega_plus).
    if (monotone_within({minus.p_defect_renorm, zero.p_defect_renorm, plus.p_defect_renorm},
                        1e-3)) {
      ++monotone;
    }
  }
  const double inv = 1.0 / static_cast<double>(n);
  rec.p_plus *= inv;
  rec.p_minus *= inv;
  rec.p_plus_renorm = renorm_plus * inv;
  rec.p_minus_renorm = renorm_minus * inv;
  rec.coherence_plus *= inv;
  rec.coherence_minus *= inv;
  rec.delta = rec.p_plus - rec.p_minus;
  rec.monotone_fraction = static_cast<double>(monotone) * inv;
  return rec;
}

ScreeningReport screen_all(const ToyLm& m, const SaeModel& s, const ScreeningConfig& cfg,
                           const ActivationSet* corpus_activations) {
  ScreeningReport report;
  report.cfg = cfg;
  report.n_features = s.d_latent;

  const Persona screen_persona = persona_from_string(cfg.screen_persona);
  std::vector<GameHistory> histories = enumerate_histories(cfg.history_rounds);
  const int boundary = m.cfg.resolved_hook_layer();
  PrefixCache cache =
      build_prefix_cache(m, histories, screen_persona, boundary, cfg.workers);
  report.history_ids = cache.history_ids;

  // Dead features: no positive activation anywhere on the training corpus.
  std::vector<bool> dead(static_cast<std::size_t>(s.d_latent), false);
  if (corpus_activations != nullptr) {
    std::vector<bool> alive(static_cast<std::size_t>(s.d_latent), false);
    for (int r = 0; r < corpus_activations->size(); ++r) {
      std::vector<double> f = encode(s, corpus_activations->vectors.row(r));
      for (int j = 0; j < s.d_latent; ++j) {
        if (f[static_cast<std::size_t>(j)] > 0.0) alive[static_cast<std::size_t>(j)] = true;
      }
    }
    for (int j = 0; j < s.d_latent; ++j) {
      if (!alive[static_cast<std::size_t>(j)]) {
        dead[static_cast<std::size_t>(j)] = true;
        report.dead_features.push_back(j);
      }
    }
  }
  report.dead_count = static_cast<int>(report.dead_features.size());

  // Prompt-activation prefilter over the configured persona renders.
  std::vector<std::vector<TokenId>> prefilter_prompts;
  for (const std::string& p : cfg.prefilter_personas) {
    const Persona persona = persona_from_string(p);
    for (const GameHistory& h : histories) {
      prefilter_prompts.push_back(render_prompt(h, persona, m.cfg.context_window));
    }
  }
  std::set<int> active = prompt_active_features(m, s, prefilter_prompts, cfg.prefilter_threshold);
  report.prefiltered_count = static_cast<int>(active.size());

  std::vector<int> screened;
  for (int f : active) {
    if (!dead[static_cast<std::size_t>(f)]) screened.push_back(f);
  }

  // Shared unsteered baseline (the omega = 0 grid for every feature).
  std::vector<ActionReadout> baseline(cache.residuals.size());
  parallel_for(cache.residuals.size(), cfg.workers, [&](std::size_t i, int) {
    baseline[i] = steered_readout(m, cache.residuals[i], cache.boundary,
                                  std::vector<double>(static_cast<std::size_t>(s.d_in), 0.0),
                                  0.0, cfg.temperature);
  });
  report.baseline_grid.resize(baseline.size());
  double base_mean = 0.0;
  for (std::size_t i = 0; i < baseline.size(); ++i) {
    report.baseline_grid[i] = baseline[i].p_blue;
    base_mean += baseline[i].p_blue;
  }
  report.baseline_mean_p_blue = base_mean / static_cast<double>(baseline.size());

  PrefixCache calib_cache = strided_subset(cache, cfg.calibration_history_stride);

  report.records.resize(screened.size());
  parallel_for(screened.size(), cfg.workers, [&](std::size_t i, int) {
    const int f = screened[i];
    double omega_plus = cfg.fixed_omega_plus;
    double omega_minus = cfg.fixed_omega_minus;
    if (cfg.calibrate_per_feature) {
      auto [lo, hi] = calibrate_omega(m, s, f, calib_cache, cfg.coherence_floor,
                                      cfg.omega_cap, cfg.omega_resolution, cfg.temperature);
      omega_minus = lo;
      omega_plus = hi;
    }
    report.records[i] =
        screen_feature(m, s, f, omega_plus, omega_minus, cache, baseline, cfg.temperature);
  });
  return report;
}

std::vector<DeltaRecord> tail_features(const ScreeningReport& report, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw InputError("tail_features: threshold must be in [0, 1]");
  }
  std::vector<DeltaRecord> tail;
  for (const DeltaRecord& r : report.records) {
    if (std::fabs(r.delta) > threshold) tail.push_back(r);
  }
  std::sort(tail.begin(), tail.end(), [](const DeltaRecord& a, const DeltaRecord& b) {
    const double fa = std::fabs(a.delta);
    const double fb = std::fabs(b.delta);
    if (fa != fb) return fa > fb;
    return a.feature_id < b.feature_id;
  });
  return tail;
}

double monotonicity_score(const std::vector<SweepCurve>& curves, double tolerance) {
  if (curves.empty()) throw InputError("monotonicity_score: no curves");
  int monotone = 0;
  for (const SweepCurve& c : curves) {
    if (c.p_defect.size() < 3) {
      throw InputError("monotonicity_score: curves need at least 3 grid points");
    }
    if (monotone_within(c.p_defect, tolerance)) ++monotone;
  }
  return static_cast<double>(monotone) / static_cast<double>(curves.size());
}

}  // namespace steerlab
