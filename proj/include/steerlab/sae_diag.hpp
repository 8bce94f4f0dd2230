#ifndef STEERLAB_SAE_DIAG_HPP
#define STEERLAB_SAE_DIAG_HPP

#include <optional>
#include <string>
#include <vector>

#include "steerlab/sae.hpp"

namespace steerlab {

enum class DensityClass { FlatTail, TailCluster, Degenerate };

const char* density_class_name(DensityClass c);

struct DensityConfig {
  int histogram_bins = 40;
  int kde_grid = 201;
  double tail_quantile = 0.9;   // secondary mode must sit above this quantile
  double valley_depth = 0.2;    // required relative dip between modes
};

// Histogram of a feature's strictly positive activations over a corpus, plus
// the flat-tail vs tail-cluster call used as the monosemanticity proxy. The
// classifier runs a Gaussian KDE over log-activations: tail-cluster means a
// local maximum above the tail quantile, separated from the main mode by a
// valley at least valley_depth below the smaller of the two peaks.
struct ActivationDensity {
  int feature_id = 0;
  std::vector<double> bin_edges;  // histogram_bins + 1 edges over [0, max]
  std::vector<long> counts;
  long n_positive = 0;
  long n_total = 0;
  double nonzero_fraction = 0.0;
  double max_activation = 0.0;
  DensityClass cls = DensityClass::Degenerate;
};

ActivationDensity activation_density(const SaeModel& s, int feature_id,
                                     const ActivationSet& data,
                                     const DensityConfig& cfg = DensityConfig{});

struct TopActivation {
  int seq = 0;
  int pos = 0;
  TokenId token = 0;
  double activation = 0.0;
  std::string context;  // tokens around the site, the site bracketed
};

struct FeatureDossier {
  int feature_id = 0;
  std::vector<TopActivation> top;  // sorted by activation desc, ties by corpus position
  bool truncated = false;          // fewer positive activations than requested
  ActivationDensity density;
  std::optional<std::string> label;
};

// k highest-activation sites with rendered context windows. `sequences` must
// be the token sequences the activation set was collected from.
FeatureDossier top_activations(const SaeModel& s, int feature_id, const ActivationSet& data,
                               const std::vector<std::vector<TokenId>>& sequences, int k,
                               const Vocabulary& vocab,
                               const DensityConfig& cfg = DensityConfig{},
                               int context_radius = 4);

}  // namespace steerlab

#endif  // STEERLAB_SAE_DIAG_HPP
