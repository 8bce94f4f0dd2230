#ifndef STEERLAB_LM_HPP
#define STEERLAB_LM_HPP

#include <functional>
#include <string>
#include <vector>

#include "steerlab/mat.hpp"
#include "steerlab/rng.hpp"
#include "steerlab/vocab.hpp"

namespace steerlab {

struct LmConfig {
  int n_layers = 2;
  int d_model = 64;
  int n_heads = 4;
  int d_ff = 0;  // 0 resolves to 4 * d_model
  int context_window = 256;
  int hook_layer = -1;  // -1 resolves to n_layers - 1 (stream entering the final layer)

  int ff_dim() const { return d_ff > 0 ? d_ff : 4 * d_model; }
  int resolved_hook_layer() const { return hook_layer >= 0 ? hook_layer : n_layers - 1; }
};

struct LayerParams {
  std::vector<double> ln1_g, ln1_b;
  Mat wq, wk, wv, wo;  // d_model x d_model, input dim major
  std::vector<double> bq, bk, bv, bo;
  std::vector<double> ln2_g, ln2_b;
  Mat w_fc;                  // d_model x d_ff
  std::vector<double> b_fc;  // d_ff
  Mat w_proj;                // d_ff x d_model
  std::vector<double> b_proj;
};

// Pre-LN decoder-only transformer in double precision. Forward passes are
// pure functions of (parameters, tokens).
struct ToyLm {
  LmConfig cfg;
  int vocab_size = 0;
  Mat tok_emb;  // V x D
  Mat pos_emb;  // context x D
  std::vector<LayerParams> layers;
  std::vector<double> lnf_g, lnf_b;
  Mat unembed;  // D x V; column v is the unembedding direction of token v
};

ToyLm init_toy_lm(const LmConfig& cfg, int vocab_size, Rng rng);

// Named view over every parameter tensor, in a fixed order shared by the
// optimizer, the checkpoint container, and the gradient checks.
struct TensorRef {
  std::string name;
  double* data;
  std::size_t size;
  int rows;
  int cols;
};
std::vector<TensorRef> tensor_refs(ToyLm& m);
std::size_t parameter_count(const ToyLm& m);

// Residual-stream hook: mutates the activation matrix at one layer boundary
// before the remaining layers run. Boundary b is the stream entering layer b;
// boundary n_layers feeds the final layer norm.
struct ResidualHook {
  int layer = 0;
  std::function<void(Mat&)> fn;
};

struct ForwardResult {
  std::vector<Mat> residuals;  // n_layers + 1 boundary matrices, each S x D
  Mat logits;                  // S x V
};

ForwardResult forward(const ToyLm& m, const std::vector<TokenId>& tokens,
                      const ResidualHook* hook = nullptr);

// Continues the pass from a residual matrix at the given layer boundary and
// returns the final-position logits. Row kernels are shared with forward(),
// so for matching inputs the result is bit-identical to the full pass. Used
// by the screening hot path, which caches the boundary residual per prompt.
std::vector<double> last_logits_from_boundary(const ToyLm& m, Mat residual, int from_layer);

struct TokenDistribution {
  std::vector<double> probs;
  double temperature = 1.0;
};

// Softmax of the last-position logits at the given temperature; temperature 0
// returns a one-hot argmax (ties resolved to the lowest token id).
TokenDistribution next_token_distribution(const ToyLm& m, const std::vector<TokenId>& tokens,
                                          double temperature,
                                          const ResidualHook* hook = nullptr);

std::vector<double> softmax_with_temperature(const std::vector<double>& logits, double temperature);

// Action-token readouts used by screening and sweeps.
struct ActionReadout {
  double p_green = 0.0;
  double p_blue = 0.0;
  double coherence = 0.0;       // p_green + p_blue
  double p_defect_renorm = 0.0; // p_blue / (p_blue + p_green)
};
ActionReadout action_readout(const TokenDistribution& dist, const Vocabulary& vocab);

// Row kernels shared by the full forward pass and the cached-prefix readout,
// so both paths produce bit-identical values.
namespace lmk {

inline constexpr double kLnEps = 1e-5;

void ln_row(const double* x, const double* g, const double* b, int n, double* y,
            double* save_mean = nullptr, double* save_rstd = nullptr);
double gelu(double x);
double gelu_derivative(double x);

}  // namespace lmk

}  // namespace steerlab

#endif  // STEERLAB_LM_HPP
