#include "steerlab/agent.hpp"

namespace steerlab {

ModelAgent::ModelAgent(std::shared_ptr<const ToyLm> model, std::shared_ptr<const SaeModel> sae,
                       ModelAgentOptions opts)
    : model_(std::move(model)), sae_(std::move(sae)), opts_(opts) {
  if (!model_) throw InputError("ModelAgent: missing model");
  if (opts_.temperature < 0.0) throw InputError("ModelAgent: temperature must be >= 0");
  if (opts_.steering && !sae_) throw InputError("ModelAgent: steering requires an SAE");
}

Action ModelAgent::act(const GameHistory& h, int as_player, Rng& rng) const {
  std::vector<TokenId> prompt =
      render_prompt(h, opts_.persona, model_->cfg.context_window, as_player);

  TokenDistribution dist;
  if (opts_.steering) {
    ResidualHook hook = steering_hook(*model_, *sae_, *opts_.steering);
    dist = next_token_distribution(*model_, prompt, opts_.temperature, &hook);
  } else {
    dist = next_token_distribution(*model_, prompt, opts_.temperature);
  }

  const Vocabulary& vocab = game_vocabulary();
  const TokenId green = vocab.id(kCooperateToken);
  const TokenId blue = vocab.id(kDefectToken);

  if (opts_.temperature == 0.0) {
    // Argmax over the two action tokens only; exact ties go to Cooperate.
    const double pg = dist.probs[static_cast<std::size_t>(green)];
    const double pb = dist.probs[static_cast<std::size_t>(blue)];
    return pb > pg ? Action::Defect : Action::Cooperate;
  }

  if (opts_.strict) {
    // Sample the full vocabulary; a non-action token is a policy failure.
    double u = rng.uniform();
    TokenId sampled = static_cast<TokenId>(dist.probs.size()) - 1;
    double acc = 0.0;
    for (std::size_t v = 0; v < dist.probs.size(); ++v) {
      acc += dist.probs[v];
      if (u < acc) {
        sampled = static_cast<TokenId>(v);
        break;
      }
    }
    if (sampled == green) return Action::Cooperate;
    if (sampled == blue) return Action::Defect;
    throw PolicyError("model emitted non-action token '" + vocab.token(sampled) +
                      "' in strict mode");
  }

  const ActionReadout readout = action_readout(dist, vocab);
  return rng.uniform() < readout.p_defect_renorm ? Action::Defect : Action::Cooperate;
}

std::string ModelAgent::describe() const {
  std::string s = "model_agent(T=" + std::to_string(opts_.temperature);
  s += ", persona=";
  s += persona_marker(opts_.persona);
  if (opts_.steering) {
    s += ", steering(feature=" + std::to_string(opts_.steering->feature_id) +
         ", omega=" + std::to_string(opts_.steering->omega) + ")";
  }
  s += opts_.strict ? ", strict)" : ")";
  return s;
}

}  // namespace steerlab
