#ifndef STEERLAB_AGENT_HPP
#define STEERLAB_AGENT_HPP

#include <memory>
#include <optional>

#include "steerlab/policy.hpp"
#include "steerlab/steering.hpp"

namespace steerlab {

struct ModelAgentOptions {
  double temperature = 0.1;
  Persona persona = Persona::Anon;
  std::optional<SteeringSpec> steering;
  // strict: sample the full vocabulary and fail on a non-action token.
  // Default renormalizes over the two action tokens, which is what the
  // screening readout does as well.
  bool strict = false;
};

// Game policy backed by the toy transformer: renders the shared history from
// its own seat, reads the next-token distribution (optionally steered), and
// samples an action.
class ModelAgent : public Policy {
 public:
  ModelAgent(std::shared_ptr<const ToyLm> model, std::shared_ptr<const SaeModel> sae,
             ModelAgentOptions opts);

  Action act(const GameHistory& h, int as_player, Rng& rng) const override;
  std::string describe() const override;

 private:
  std::shared_ptr<const ToyLm> model_;
  std::shared_ptr<const SaeModel> sae_;  // required only when steering is set
  ModelAgentOptions opts_;
};

}  // namespace steerlab

#endif  // STEERLAB_AGENT_HPP
