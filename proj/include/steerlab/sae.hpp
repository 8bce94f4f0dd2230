#ifndef STEERLAB_SAE_HPP
#define STEERLAB_SAE_HPP

#include <cstdint>
#include <vector>

#include "steerlab/lm.hpp"
#include "steerlab/mat.hpp"
#include "steerlab/rng.hpp"
#include "steerlab/vocab.hpp"

namespace steerlab {

// Sparse autoencoder over residual-stream activations. encode is rectified
// (non-negative); decoder columns are kept unit-norm after every training
// step so the L1 penalty cannot be absorbed by decoder scale.
struct SaeModel {
  int d_in = 0;
  int d_latent = 0;
  Mat w_enc;                  // d_latent x d_in (row per latent)
  std::vector<double> b_enc;  // d_latent
  Mat w_dec;                  // d_in x d_latent (column per latent)
  std::vector<double> b_dec;  // d_in
  double lambda_l1 = 0.0;

  std::vector<double> decoder_column(int feature) const;
  void normalize_decoder_columns();
};

SaeModel init_sae(int d_in, int d_latent, double lambda_l1, Rng rng);

std::vector<TensorRef> tensor_refs(SaeModel& s);

// f = relu(W_enc (x - b_dec) + b_enc)
std::vector<double> encode(const SaeModel& s, const double* x);
inline std::vector<double> encode(const SaeModel& s, const std::vector<double>& x) {
  return encode(s, x.data());
}

// Single-latent readout; avoids materializing the full latent vector.
double feature_activation(const SaeModel& s, const double* x, int feature);

// x_hat = W_dec f + b_dec
std::vector<double> decode(const SaeModel& s, const std::vector<double>& f);

struct SaeLoss {
  double total = 0.0;
  double l2 = 0.0;  // squared reconstruction error
  double l1 = 0.0;  // lambda-weighted latent L1
};
SaeLoss sae_loss(const SaeModel& s, const double* x);
inline SaeLoss sae_loss(const SaeModel& s, const std::vector<double>& x) {
  return sae_loss(s, x.data());
}

// Residual vectors harvested from forward passes, with enough provenance to
// reconstruct token contexts for the dashboards.
struct ActivationSite {
  int seq = 0;
  int pos = 0;
  TokenId token = 0;
};

struct ActivationSet {
  int d_in = 0;
  Mat vectors;  // n_sites x d_in
  std::vector<ActivationSite> sites;

  int size() const { return vectors.rows; }
};

ActivationSet collect_activations(const ToyLm& m,
                                  const std::vector<std::vector<TokenId>>& sequences,
                                  int boundary, int workers);

// Loss and its gradient with respect to every parameter, accumulated into
// `grads` (an SaeModel used purely as a same-shaped holder). Returns total loss.
double sae_loss_and_grad(const SaeModel& s, const double* x, SaeModel& grads);
SaeModel sae_zeroed_like(const SaeModel& s);

struct SaeTrainConfig {
  int steps = 8000;
  int batch = 32;
  double lr = 0.01;  // plain SGD, fixed step size
  double holdout_fraction = 0.1;
  int eval_every = 500;
  // Polyak tail averaging: the returned model averages the iterates over the
  // trailing fraction of steps, which removes the fixed-step noise floor from
  // the held-out metrics. 0 disables.
  double tail_average_fraction = 0.25;
  int workers = 0;
};

struct SaeTracePoint {
  int step = 0;
  double train_loss = 0.0;
  double heldout_recon = 0.0;   // NaN outside eval steps
  double heldout_active = 0.0;  // mean latents > 1e-6, NaN outside eval steps
};

struct SaeTrainResult {
  SaeModel sae;
  std::vector<SaeTracePoint> trace;
  double initial_heldout_recon = 0.0;
  double final_heldout_recon = 0.0;
  double final_heldout_active = 0.0;
};

// Held-out rows are the trailing fraction of the activation set. Deterministic
// for a fixed seed, independent of the worker count.
SaeTrainResult train_sae(const ActivationSet& data, int d_latent, double lambda_l1,
                         const SaeTrainConfig& cfg, Rng rng);

// Mean count of latents above the activity threshold on [lo, hi) rows.
double mean_active_latents(const SaeModel& s, const ActivationSet& data, std::size_t lo,
                           std::size_t hi, double threshold = 1e-6);
double mean_reconstruction_loss(const SaeModel& s, const ActivationSet& data, std::size_t lo,
                                std::size_t hi);

}  // namespace steerlab

#endif  // STEERLAB_SAE_HPP
