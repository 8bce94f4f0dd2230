#ifndef STEERLAB_STEERING_HPP
#define STEERLAB_STEERING_HPP

#include <string>
#include <vector>

#include "steerlab/game.hpp"
#include "steerlab/lm.hpp"
#include "steerlab/prompt.hpp"
#include "steerlab/sae.hpp"

namespace steerlab {

// The residual-stream intervention: add omega * (decoder column feature_id)
// at the given layer boundary.
struct SteeringSpec {
  int layer = -1;  // -1 resolves to the model's hook layer
  int feature_id = 0;
  double omega = 0.0;

  int resolved_layer(const LmConfig& cfg) const {
    return layer >= 0 ? layer : cfg.resolved_hook_layer();
  }
};

// Pure form: returns a steered copy, input untouched. Every position is
// shifted unless last_position_only is set.
Mat steer_residual(const Mat& x, const SaeModel& s, const SteeringSpec& spec,
                   bool last_position_only = false);

// Hook wrapper around steer_residual for use with forward().
ResidualHook steering_hook(const ToyLm& m, const SaeModel& s, const SteeringSpec& spec,
                           bool last_position_only = false);

// Full-pass steered readout for one history.
TokenDistribution steered_distribution(const ToyLm& m, const SaeModel& s, const GameHistory& h,
                                       const SteeringSpec& spec, double temperature,
                                       Persona persona = Persona::Anon,
                                       bool last_position_only = false);

// Hot path for screening/sweeps: the residual at the hook boundary is cached
// once per prompt and only the layers above it are re-run per (feature,
// omega). Shares its row kernels with forward(), so readouts are
// bit-identical to the full pass.
struct PrefixCache {
  int boundary = 0;
  std::vector<Mat> residuals;               // one per prompt
  std::vector<std::string> history_ids;     // aligned with residuals
};

PrefixCache build_prefix_cache(const ToyLm& m, const std::vector<GameHistory>& histories,
                               Persona persona, int boundary, int workers);

ActionReadout steered_readout(const ToyLm& m, const Mat& boundary_residual, int boundary,
                              const std::vector<double>& direction, double omega,
                              double temperature, bool last_position_only = false);

struct SweepCurve {
  std::string history_id;
  std::vector<double> omegas;     // sorted, contains 0
  std::vector<double> p_defect;   // renormalized P(blue)/(P(blue)+P(green))
  std::vector<double> coherence;  // raw P(green)+P(blue)
};

// One curve per supplied grid point; the grid must be sorted and contain 0.
SweepCurve sweep(const ToyLm& m, const SaeModel& s, const GameHistory& h, int feature_id,
                 const std::vector<double>& omega_grid, double temperature,
                 Persona persona = Persona::Anon);

// Uniformly spaced grid over [omega_minus, omega_plus] that always includes 0.
std::vector<double> make_omega_grid(double omega_minus, double omega_plus, int points);

}  // namespace steerlab

#endif  // STEERLAB_STEERING_HPP
