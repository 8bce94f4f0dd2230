#ifndef STEERLAB_SCREENING_HPP
#define STEERLAB_SCREENING_HPP

#include <set>
#include <string>
#include <vector>

#include "steerlab/steering.hpp"

namespace steerlab {

struct ScreeningConfig {
  int history_rounds = 3;
  double temperature = 1.0;
  double coherence_floor = 0.9;
  double omega_cap = 16.0;
  double omega_resolution = 0.01;
  double tail_threshold = 0.6;
  bool calibrate_per_feature = true;
  double fixed_omega_plus = 8.0;    // used when calibrate_per_feature is false
  double fixed_omega_minus = -8.0;
  int calibration_history_stride = 4;  // calibration probes use every k-th history
  std::string screen_persona = "anon";
  std::vector<std::string> prefilter_personas = {"anon", "dove", "hawk"};
  double prefilter_threshold = 1e-6;
  int workers = 0;
};

// Per-feature screening result. Probabilities are raw P("blue") readings at
// the action slot, averaged uniformly over the canonical history grid;
// renormalized two-token values are kept alongside.
struct DeltaRecord {
  int feature_id = 0;
  double omega_plus = 0.0;
  double omega_minus = 0.0;
  double p_plus = 0.0;
  double p_minus = 0.0;
  double delta = 0.0;  // p_plus - p_minus
  double p_plus_renorm = 0.0;
  double p_minus_renorm = 0.0;
  double coherence_plus = 0.0;
  double coherence_minus = 0.0;
  double monotone_fraction = 0.0;
  std::vector<double> grid_plus;   // 4^n entries, canonical history order
  std::vector<double> grid_zero;
  std::vector<double> grid_minus;
};

struct ScreeningReport {
  std::string model_digest;
  std::string sae_digest;
  ScreeningConfig cfg;
  int n_features = 0;
  int prefiltered_count = 0;
  int dead_count = 0;
  std::vector<int> dead_features;
  double baseline_mean_p_blue = 0.0;
  std::vector<double> baseline_grid;  // shared omega = 0 grid
  std::vector<std::string> history_ids;
  std::vector<DeltaRecord> records;   // ascending feature id
};

// Features with activation above `threshold` on at least one token position
// of at least one prompt.
std::set<int> prompt_active_features(const ToyLm& m, const SaeModel& s,
                                     const std::vector<std::vector<TokenId>>& prompts,
                                     double threshold = 1e-6);

// Largest-magnitude omega per sign (doubling then bisection, |omega| <= cap)
// keeping mean coherence over the supplied cached prompts >= floor. Returns
// (0, 0) when even a resolution-sized step breaks coherence.
std::pair<double, double> calibrate_omega(const ToyLm& m, const SaeModel& s, int feature_id,
                                          const PrefixCache& cache, double coherence_floor,
                                          double omega_cap, double omega_resolution,
                                          double temperature);

DeltaRecord screen_feature(const ToyLm& m, const SaeModel& s, int feature_id,
                           double omega_plus, double omega_minus, const PrefixCache& cache,
                           const std::vector<ActionReadout>& baseline, double temperature);

// The full prefilter -> calibrate -> screen pipeline over every non-dead,
// prompt-active feature. `corpus_activations` (optional) defines dead
// features: latents with no positive activation anywhere on the corpus.
ScreeningReport screen_all(const ToyLm& m, const SaeModel& s, const ScreeningConfig& cfg,
                           const ActivationSet* corpus_activations = nullptr);

// Records with |delta| > threshold, sorted by |delta| descending.
std::vector<DeltaRecord> tail_features(const ScreeningReport& report, double threshold);

// Fraction of curves whose p_defect sequence is monotone within tolerance.
double monotonicity_score(const std::vector<SweepCurve>& curves, double tolerance = 1e-3);

}  // namespace steerlab

#endif  // STEERLAB_SCREENING_HPP
