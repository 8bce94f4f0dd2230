#ifndef STEERLAB_LM_TRAIN_HPP
#define STEERLAB_LM_TRAIN_HPP

#include <functional>
#include <vector>

#include "steerlab/corpus.hpp"
#include "steerlab/lm.hpp"

namespace steerlab {

struct LmTrainConfig {
  int steps = 1200;
  int batch = 8;
  double lr = 0.35;  // plain SGD, fixed step size
  double holdout_fraction = 0.1;
  double target_accuracy = 0.9;  // action accuracy target at noise 0
  int eval_every = 100;
  int workers = 0;
};

struct TrainTracePoint {
  int step = 0;
  double train_loss = 0.0;
  double heldout_loss = 0.0;      // NaN outside eval steps
  double heldout_accuracy = 0.0;  // NaN outside eval steps
};

struct LmTrainResult {
  ToyLm model;
  std::vector<TrainTracePoint> trace;
  double initial_heldout_loss = 0.0;
  double final_heldout_loss = 0.0;
  // Final-position argmax compared against the teacher's pre-noise action.
  double final_action_accuracy = 0.0;
};

// Next-token cross-entropy over all positions, averaged per sequence.
// Gradients accumulate into `grads` (same shapes as the model) when non-null.
double sequence_loss_and_grad(const ToyLm& m, const std::vector<TokenId>& tokens,
                              ToyLm* grads);

ToyLm zeroed_like(const ToyLm& m);

// Plain minibatch SGD. Deterministic for a fixed seed: batches are drawn from
// a per-step derived stream and per-sequence gradients are summed in slot
// order, so the result does not depend on the worker count. On NaN/Inf loss
// the last evaluated snapshot is handed to `save_last_good` (if set) and a
// TrainingError is thrown.
LmTrainResult train_toy_lm(const TranscriptCorpus& corpus, const LmConfig& mcfg,
                           const LmTrainConfig& tcfg, Rng rng,
                           const std::function<void(const ToyLm&)>& save_last_good = {});

// Held-out split helper: the last floor(fraction * n) sequences.
std::pair<std::size_t, std::size_t> holdout_range(std::size_t n, double fraction);

}  // namespace steerlab

#endif  // STEERLAB_LM_TRAIN_HPP
