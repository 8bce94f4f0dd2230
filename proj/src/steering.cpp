#include "steerlab/steering.hpp"

#include <algorithm>
#include <cmath>

#include "steerlab/errors.hpp"
#include "steerlab/parallel.hpp"

namespace steerlab {

namespace {

void add_direction(Mat& x, const std::vector<double>& dir, double omega,
                   bool last_position_only) {
  const int first = last_position_only ? x.rows - 1 : 0;
  for (int i = first; i < x.rows; ++i) {
    double* row = x.row(i);
    for (int t = 0; t < x.cols; ++t) row[t] += omega * dir[static_cast<std::size_t>(t)];
  }
}

}  // namespace

Mat steer_residual(const Mat& x, const SaeModel& s, const SteeringSpec& spec,
                   bool last_position_only) {
  if (x.cols != s.d_in) throw InputError("steer_residual: width != SAE d_in");
  if (spec.feature_id < 0 || spec.feature_id >= s.d_latent) {
    throw InputError("steer_residual: feature id out of range");
  }
  Mat out = x;
  add_direction(out, s.decoder_column(spec.feature_id), spec.omega, last_position_only);
  return out;
}

ResidualHook steering_hook(const ToyLm& m, const SaeModel& s, const SteeringSpec& spec,
                           bool last_position_only) {
  if (m.cfg.d_model != s.d_in) throw InputError("steering_hook: SAE d_in != d_model");
  if (spec.feature_id < 0 || spec.feature_id >= s.d_latent) {
    throw InputError("steering_hook: feature id out of range");
  }
  ResidualHook hook;
  hook.layer = spec.resolved_layer(m.cfg);
  std::vector<double> dir = s.decoder_column(spec.feature_id);
  const double omega = spec.omega;
  hook.fn = [dir = std::move(dir), omega, last_position_only](Mat& r) {
    add_direction(r, dir, omega, last_position_only);
  };
  return hook;
}

TokenDistribution steered_distribution(const ToyLm& m, const SaeModel& s, const GameHistory& h,
                                       const SteeringSpec& spec, double temperature,
                                       Persona persona, bool last_position_only) {
  std::vector<TokenId> prompt = render_prompt(h, persona, m.cfg.context_window);
  ResidualHook hook = steering_hook(m, s, spec, last_position_only);
  return next_token_distribution(m, prompt, temperature, &hook);
}

PrefixCache build_prefix_cache(const ToyLm& m, const std::vector<GameHistory>& histories,
                               Persona persona, int boundary, int workers) {
  if (boundary < 0 || boundary > m.cfg.n_layers) throw InputError("boundary out of range");
  PrefixCache cache;
  cache.boundary = boundary;
  cache.residuals.resize(histories.size());
  cache.history_ids.resize(histories.size());
  parallel_for(histories.size(), workers, [&](std::size_t i, int) {
    std::vector<TokenId> prompt = render_prompt(histories[i], persona, m.cfg.context_window);
    ForwardResult fr = forward(m, prompt);
    cache.residuals[i] = fr.residuals[static_cast<std::size_t>(boundary)];
    cache.history_ids[i] = history_id(histories[i]);
  });
  return cache;
}

ActionReadout steered_readout(const ToyLm& m, const Mat& boundary_residual, int boundary,
                              const std::vector<double>& direction, double omega,
                              double temperature, bool last_position_only) {
  Mat r = boundary_residual;
  add_direction(r, direction, omega, last_position_only);
  std::vector<double> logits = last_logits_from_boundary(m, std::move(r), boundary);
  TokenDistribution dist{softmax_with_temperature(logits, temperature), temperature};
  return action_readout(dist, game_vocabulary());
}

SweepCurve sweep(const ToyLm& m, const SaeModel& s, const GameHistory& h, int feature_id,
                 const std::vector<double>& omega_grid, double temperature, Persona persona) {
  if (omega_grid.empty()) throw InputError("sweep: empty omega grid");
  if (!std::is_sorted(omega_grid.begin(), omega_grid.end())) {
    throw InputError("sweep: omega grid must be sorted");
  }
  if (std::find(omega_grid.begin(), omega_grid.end(), 0.0) == omega_grid.end()) {
    throw InputError("sweep: omega grid must contain 0");
  }
  std::vector<GameHistory> one{h};
  PrefixCache cache =
      build_prefix_cache(m, one, persona, m.cfg.resolved_hook_layer(), 1);
  const std::vector<double> dir = s.decoder_column(feature_id);

  SweepCurve curve;
  curve.history_id = history_id(h);
  curve.omegas = omega_grid;
  curve.p_defect.resize(omega_grid.size());
  curve.coherence.resize(omega_grid.size());
  for (std::size_t i = 0; i < omega_grid.size(); ++i) {
    ActionReadout r = steered_readout(m, cache.residuals[0], cache.boundary, dir,
                                      omega_grid[i], temperature);
    curve.p_defect[i] = r.p_defect_renorm;
    curve.coherence[i] = r.coherence;
  }
  return curve;
}

std::vector<double> make_omega_grid(double omega_minus, double omega_plus, int points) {
  if (points < 1) throw InputError("make_omega_grid: points must be >= 1");
  if (omega_minus > 0.0 || omega_plus < 0.0) {
    throw InputError("make_omega_grid: range must straddle 0");
  }
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(points) + 1);
  if (points == 1) {
    grid.push_back(0.0);
    return grid;
  }
  const double span = omega_plus - omega_minus;
  for (int i = 0; i < points; ++i) {
    grid.push_back(omega_minus + span * static_cast<double>(i) / (points - 1));
  }
  // Snap the nearest grid point to exactly 0 so the baseline is shared.
  std::size_t nearest = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (std::fabs(grid[i]) < std::fabs(grid[nearest])) nearest = i;
  }
  grid[nearest] = 0.0;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

}  // namespace steerlab
