#include "steerlab/sae_diag.hpp"

#include <algorithm>
#include <cmath>

#include "steerlab/errors.hpp"

namespace steerlab {

const char* density_class_name(DensityClass c) {
  switch (c) {
    case DensityClass::FlatTail: return "flat-tail";
    case DensityClass::TailCluster: return "tail-cluster";
    case DensityClass::Degenerate: return "degenerate";
  }
  return "degenerate";
}

namespace {

std::vector<double> positive_activations(const SaeModel& s, int feature_id,
                                         const ActivationSet& data) {
  std::vector<double> acts;
  for (int r = 0; r < data.size(); ++r) {
    const double a = feature_activation(s, data.vectors.row(r), feature_id);
    if (a > 0.0) acts.push_back(a);
  }
  return acts;
}

DensityClass classify(const std::vector<double>& acts, const DensityConfig& cfg) {
  if (acts.size() < 8) return DensityClass::FlatTail;  // too little mass to call bimodal
  std::vector<double> logs;
  logs.reserve(acts.size());
  for (double a : acts) logs.push_back(std::log10(a));
  std::sort(logs.begin(), logs.end());
  const double lo = logs.front();
  const double hi = logs.back();
  if (hi - lo < 1e-12) return DensityClass::FlatTail;  // single spike

  // Silverman bandwidth on the log scale.
  const double n = static_cast<double>(logs.size());
  double mean = 0.0;
  for (double v : logs) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : logs) var += (v - mean) * (v - mean);
  var /= n;
  double bw = 1.06 * std::sqrt(var) * std::pow(n, -0.2);
  if (bw < 1e-6) bw = 1e-6;

  const int G = cfg.kde_grid;
  std::vector<double> density(static_cast<std::size_t>(G), 0.0);
  const double span = hi - lo;
  const double step = span / (G - 1);
  for (int g = 0; g < G; ++g) {
    const double x = lo + g * step;
    double d = 0.0;
    for (double v : logs) {
      const double z = (x - v) / bw;
      d += std::exp(-0.5 * z * z);
    }
    density[static_cast<std::size_t>(g)] = d;
  }

  const double q_idx = cfg.tail_quantile * (n - 1);
  const double tail_threshold = logs[static_cast<std::size_t>(q_idx)];

  // Local maxima/minima on the KDE grid.
  struct Peak {
    int idx;
    double height;
  };
  std::vector<Peak> maxima;
  for (int g = 1; g + 1 < G; ++g) {
    if (density[static_cast<std::size_t>(g)] >= density[static_cast<std::size_t>(g - 1)] &&
        density[static_cast<std::size_t>(g)] > density[static_cast<std::size_t>(g + 1)]) {
      maxima.push_back({g, density[static_cast<std::size_t>(g)]});
    }
  }
  if (maxima.size() < 2) return DensityClass::FlatTail;

  const Peak global = *std::max_element(
      maxima.begin(), maxima.end(), [](const Peak& a, const Peak& b) { return a.height < b.height; });

  for (const Peak& p : maxima) {
    if (p.idx == global.idx) continue;
    const double x = lo + p.idx * step;
    if (x <= tail_threshold) continue;
    // Valley between the global mode and this candidate.
    const int a = std::min(global.idx, p.idx);
    const int b = std::max(global.idx, p.idx);
    double valley = density[static_cast<std::size_t>(a)];
    for (int g = a; g <= b; ++g) valley = std::min(valley, density[static_cast<std::size_t>(g)]);
    const double smaller_peak = std::min(global.height, p.height);
    if (smaller_peak - valley >= cfg.valley_depth * smaller_peak) {
      return DensityClass::TailCluster;
    }
  }
  return DensityClass::FlatTail;
}

}  // namespace

ActivationDensity activation_density(const SaeModel& s, int feature_id,
                                     const ActivationSet& data, const DensityConfig& cfg) {
  if (feature_id < 0 || feature_id >= s.d_latent) throw InputError("feature id out of range");
  ActivationDensity out;
  out.feature_id = feature_id;
  out.n_total = data.size();

  std::vector<double> acts = positive_activations(s, feature_id, data);
  out.n_positive = static_cast<long>(acts.size());
  out.nonzero_fraction =
      out.n_total > 0 ? static_cast<double>(out.n_positive) / static_cast<double>(out.n_total) : 0.0;
  if (acts.empty()) {
    out.cls = DensityClass::Degenerate;
    return out;
  }
  out.max_activation = *std::max_element(acts.begin(), acts.end());

  const int bins = cfg.histogram_bins;
  out.bin_edges.resize(static_cast<std::size_t>(bins) + 1);
  out.counts.assign(static_cast<std::size_t>(bins), 0);
  const double hi = out.max_activation > 0.0 ? out.max_activation : 1.0;
  for (int b = 0; b <= bins; ++b) {
    out.bin_edges[static_cast<std::size_t>(b)] = hi * static_cast<double>(b) / bins;
  }
  for (double a : acts) {
    int b = static_cast<int>(a / hi * bins);
    if (b >= bins) b = bins - 1;
    if (b < 0) b = 0;
    ++out.counts[static_cast<std::size_t>(b)];
  }
  out.cls = classify(acts, cfg);
  return out;
}

FeatureDossier top_activations(const SaeModel& s, int feature_id, const ActivationSet& data,
                               const std::vector<std::vector<TokenId>>& sequences, int k,
                               const Vocabulary& vocab, const DensityConfig& cfg,
                               int context_radius) {
  if (k < 1) throw InputError("top_activations: k must be >= 1");
  FeatureDossier dossier;
  dossier.feature_id = feature_id;
  dossier.density = activation_density(s, feature_id, data, cfg);

  struct Hit {
    double activation;
    int row;
  };
  std::vector<Hit> hits;
  for (int r = 0; r < data.size(); ++r) {
    const double a = feature_activation(s, data.vectors.row(r), feature_id);
    if (a > 0.0) hits.push_back({a, r});
  }
  // Descending activation; ties by corpus position (site order is corpus order).
  std::stable_sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
    if (a.activation != b.activation) return a.activation > b.activation;
    return a.row < b.row;
  });
  dossier.truncated = static_cast<int>(hits.size()) < k;
  const int take = std::min<int>(k, static_cast<int>(hits.size()));
  dossier.top.reserve(static_cast<std::size_t>(take));
  for (int i = 0; i < take; ++i) {
    const ActivationSite& site = data.sites[static_cast<std::size_t>(hits[static_cast<std::size_t>(i)].row)];
    TopActivation rec;
    rec.seq = site.seq;
    rec.pos = site.pos;
    rec.token = site.token;
    rec.activation = hits[static_cast<std::size_t>(i)].activation;
    const std::vector<TokenId>& toks = sequences[static_cast<std::size_t>(site.seq)];
    const int lo = std::max(0, site.pos - context_radius);
    const int hi = std::min<int>(static_cast<int>(toks.size()) - 1, site.pos + context_radius);
    std::string ctx;
    for (int p = lo; p <= hi; ++p) {
      if (!ctx.empty()) ctx += ' ';
      if (p == site.pos) {
        ctx += '[';
        ctx += vocab.token(toks[static_cast<std::size_t>(p)]);
        ctx += ']';
      } else {
        ctx += vocab.token(toks[static_cast<std::size_t>(p)]);
      }
    }
    rec.context = std::move(ctx);
    dossier.top.push_back(std::move(rec));
  }
  return dossier;
}

}  // namespace steerlab
