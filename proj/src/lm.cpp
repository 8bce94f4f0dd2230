#include "steerlab/lm.hpp"

#include <algorithm>
#include <cmath>

#include "steerlab/errors.hpp"

namespace steerlab {

namespace lmk {

void ln_row(const double* x, const double* g, const double* b, int n, double* y,
            double* save_mean, double* save_rstd) {
  double mean = 0.0;
  for (int i = 0; i < n; ++i) mean += x[i];
  mean /= n;
  double var = 0.0;
  for (int i = 0; i < n; ++i) {
    double d = x[i] - mean;
    var += d * d;
  }
  var /= n;
  double rstd = 1.0 / std::sqrt(var + kLnEps);
  for (int i = 0; i < n; ++i) y[i] = g[i] * ((x[i] - mean) * rstd) + b[i];
  if (save_mean) *save_mean = mean;
  if (save_rstd) *save_rstd = rstd;
}

double gelu(double x) { return 0.5 * x * std::erfc(-x * 0.7071067811865475244); }

double gelu_derivative(double x) {
  const double phi = 0.5 * std::erfc(-x * 0.7071067811865475244);
  const double pdf = std::exp(-0.5 * x * x) * 0.3989422804014326779;
  return phi + x * pdf;
}

}  // namespace lmk

namespace {

// Softmax attention context for one query row of one head: out[0..dh).
// K and V are S x D matrices with the head's slice at column offset `off`.
// `scores` is caller scratch of at least query_pos + 1 entries.
void attn_context_row(const double* q, const Mat& k, const Mat& v, int query_pos, int off,
                      int dh, double inv_sqrt_dh, double* scores, double* out,
                      double* save_weights = nullptr) {
  const int n = query_pos + 1;  // causal mask
  double max_score = -1e300;
  for (int j = 0; j < n; ++j) {
    const double* krow = k.row(j) + off;
    double s = 0.0;
    for (int t = 0; t < dh; ++t) s += q[t] * krow[t];
    s *= inv_sqrt_dh;
    scores[j] = s;
    if (s > max_score) max_score = s;
  }
  double denom = 0.0;
  for (int j = 0; j < n; ++j) {
    scores[j] = std::exp(scores[j] - max_score);
    denom += scores[j];
  }
  const double inv = 1.0 / denom;
  for (int t = 0; t < dh; ++t) out[t] = 0.0;
  for (int j = 0; j < n; ++j) {
    const double w = scores[j] * inv;
    if (save_weights) save_weights[j] = w;
    const double* vrow = v.row(j) + off;
    for (int t = 0; t < dh; ++t) out[t] += w * vrow[t];
  }
}

void validate_tokens(const ToyLm& m, const std::vector<TokenId>& tokens) {
  if (tokens.empty()) throw InputError("forward: empty token sequence");
  if (static_cast<int>(tokens.size()) > m.cfg.context_window) {
    throw InputError("forward: sequence length " + std::to_string(tokens.size()) +
                     " exceeds context window " + std::to_string(m.cfg.context_window));
  }
  for (TokenId t : tokens) {
    if (t < 0 || t >= m.vocab_size) {
      throw InputError("forward: token id out of vocabulary: " + std::to_string(t));
    }
  }
}

struct Scratch {
  Mat xln, q, k, v, ctx;
  std::vector<double> tmp;
  std::vector<double> scores;
};

void attention_rows(const ToyLm& m, const LayerParams& lp, Mat& r, Scratch& s, int first_out) {
  const int S = r.rows;
  const int D = m.cfg.d_model;
  const int H = m.cfg.n_heads;
  const int dh = D / H;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  for (int i = 0; i < S; ++i) {
    lmk::ln_row(r.row(i), lp.ln1_g.data(), lp.ln1_b.data(), D, s.xln.row(i));
  }
  // Keys and values are needed at every position; queries only where output is.
  for (int i = 0; i < S; ++i) {
    affine_row(s.xln.row(i), lp.wk.data.data(), lp.bk.data(), D, D, s.k.row(i));
    affine_row(s.xln.row(i), lp.wv.data.data(), lp.bv.data(), D, D, s.v.row(i));
  }
  for (int i = first_out; i < S; ++i) {
    affine_row(s.xln.row(i), lp.wq.data.data(), lp.bq.data(), D, D, s.q.row(i));
    for (int h = 0; h < H; ++h) {
      const int off = h * dh;
      attn_context_row(s.q.row(i) + off, s.k, s.v, i, off, dh, inv_sqrt_dh,
                       s.scores.data(), s.ctx.row(i) + off);
    }
    affine_row(s.ctx.row(i), lp.wo.data.data(), lp.bo.data(), D, D, s.tmp.data());
    double* rrow = r.row(i);
    for (int t = 0; t < D; ++t) rrow[t] += s.tmp[t];
  }
}

void mlp_rows(const ToyLm& m, const LayerParams& lp, Mat& r, Scratch& s, int first_out) {
  const int S = r.rows;
  const int D = m.cfg.d_model;
  const int F = m.cfg.ff_dim();
  std::vector<double> xln(D), z(F), u(F), out(D);
  for (int i = first_out; i < S; ++i) {
    lmk::ln_row(r.row(i), lp.ln2_g.data(), lp.ln2_b.data(), D, xln.data());
    affine_row(xln.data(), lp.w_fc.data.data(), lp.b_fc.data(), D, F, z.data());
    for (int t = 0; t < F; ++t) u[t] = lmk::gelu(z[t]);
    affine_row(u.data(), lp.w_proj.data.data(), lp.b_proj.data(), F, D, out.data());
    double* rrow = r.row(i);
    for (int t = 0; t < D; ++t) rrow[t] += out[t];
  }
  (void)s;
}

void final_logits_row(const ToyLm& m, const double* residual_row, double* logits_row) {
  const int D = m.cfg.d_model;
  std::vector<double> h(D);
  lmk::ln_row(residual_row, m.lnf_g.data(), m.lnf_b.data(), D, h.data());
  affine_row(h.data(), m.unembed.data.data(), nullptr, D, m.vocab_size, logits_row);
}

Scratch make_scratch(int S, int D) {
  Scratch s;
  s.xln = Mat(S, D);
  s.q = Mat(S, D);
  s.k = Mat(S, D);
  s.v = Mat(S, D);
  s.ctx = Mat(S, D);
  s.tmp.assign(static_cast<std::size_t>(D), 0.0);
  s.scores.assign(static_cast<std::size_t>(S), 0.0);
  return s;
}

}  // namespace

ToyLm init_toy_lm(const LmConfig& cfg, int vocab_size, Rng rng) {
  if (cfg.d_model % cfg.n_heads != 0) throw InputError("d_model must be divisible by n_heads");
  if (cfg.n_layers < 1) throw InputError("n_layers must be >= 1");
  if (vocab_size < 2) throw InputError("vocabulary too small");
  ToyLm m;
  m.cfg = cfg;
  m.vocab_size = vocab_size;
  const int D = cfg.d_model;
  const int F = cfg.ff_dim();
  const double w_std = 0.08;

  auto fill = [&rng](Mat& mat, double std) {
    for (double& x : mat.data) x = std * rng.gaussian();
  };

  m.tok_emb = Mat(vocab_size, D);
  fill(m.tok_emb, w_std);
  m.pos_emb = Mat(cfg.context_window, D);
  fill(m.pos_emb, 0.02);
  m.layers.resize(static_cast<std::size_t>(cfg.n_layers));
  for (LayerParams& lp : m.layers) {
    lp.ln1_g.assign(D, 1.0);
    lp.ln1_b.assign(D, 0.0);
    lp.wq = Mat(D, D);
    lp.wk = Mat(D, D);
    lp.wv = Mat(D, D);
    lp.wo = Mat(D, D);
    fill(lp.wq, w_std);
    fill(lp.wk, w_std);
    fill(lp.wv, w_std);
    fill(lp.wo, w_std);
    lp.bq.assign(D, 0.0);
    lp.bk.assign(D, 0.0);
    lp.bv.assign(D, 0.0);
    lp.bo.assign(D, 0.0);
    lp.ln2_g.assign(D, 1.0);
    lp.ln2_b.assign(D, 0.0);
    lp.w_fc = Mat(D, F);
    fill(lp.w_fc, w_std);
    lp.b_fc.assign(F, 0.0);
    lp.w_proj = Mat(F, D);
    fill(lp.w_proj, w_std);
    lp.b_proj.assign(D, 0.0);
  }
  m.lnf_g.assign(D, 1.0);
  m.lnf_b.assign(D, 0.0);
  m.unembed = Mat(D, vocab_size);
  fill(m.unembed, w_std);
  return m;
}

std::vector<TensorRef> tensor_refs(ToyLm& m) {
  std::vector<TensorRef> refs;
  auto add_mat = [&refs](const std::string& name, Mat& mat) {
    refs.push_back({name, mat.data.data(), mat.data.size(), mat.rows, mat.cols});
  };
  auto add_vec = [&refs](const std::string& name, std::vector<double>& v) {
    refs.push_back({name, v.data(), v.size(), 1, static_cast<int>(v.size())});
  };
  add_mat("tok_emb", m.tok_emb);
  add_mat("pos_emb", m.pos_emb);
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    LayerParams& lp = m.layers[l];
    const std::string p = "layer" + std::to_string(l) + ".";
    add_vec(p + "ln1_g", lp.ln1_g);
    add_vec(p + "ln1_b", lp.ln1_b);
    add_mat(p + "wq", lp.wq);
    add_vec(p + "bq", lp.bq);
    add_mat(p + "wk", lp.wk);
    add_vec(p + "bk", lp.bk);
    add_mat(p + "wv", lp.wv);
    add_vec(p + "bv", lp.bv);
    add_mat(p + "wo", lp.wo);
    add_vec(p + "bo", lp.bo);
    add_vec(p + "ln2_g", lp.ln2_g);
    add_vec(p + "ln2_b", lp.ln2_b);
    add_mat(p + "w_fc", lp.w_fc);
    add_vec(p + "b_fc", lp.b_fc);
    add_mat(p + "w_proj", lp.w_proj);
    add_vec(p + "b_proj", lp.b_proj);
  }
  add_vec("lnf_g", m.lnf_g);
  add_vec("lnf_b", m.lnf_b);
  add_mat("unembed", m.unembed);
  return refs;
}

std::size_t parameter_count(const ToyLm& m) {
  std::size_t n = 0;
  for (const TensorRef& r : tensor_refs(const_cast<ToyLm&>(m))) n += r.size;
  return n;
}

ForwardResult forward(const ToyLm& m, const std::vector<TokenId>& tokens,
                      const ResidualHook* hook) {
  validate_tokens(m, tokens);
  const int S = static_cast<int>(tokens.size());
  const int D = m.cfg.d_model;
  const int L = m.cfg.n_layers;
  if (hook && (hook->layer < 0 || hook->layer > L)) {
    throw InputError("hook layer out of range");
  }

  ForwardResult out;
  out.residuals.reserve(static_cast<std::size_t>(L) + 1);

  Mat r(S, D);
  for (int i = 0; i < S; ++i) {
    const double* te = m.tok_emb.row(tokens[static_cast<std::size_t>(i)]);
    const double* pe = m.pos_emb.row(i);
    double* rr = r.row(i);
    for (int t = 0; t < D; ++t) rr[t] = te[t] + pe[t];
  }

  Scratch s = make_scratch(S, D);
  for (int l = 0; l < L; ++l) {
    if (hook && hook->layer == l && hook->fn) hook->fn(r);
    out.residuals.push_back(r);
    attention_rows(m, m.layers[static_cast<std::size_t>(l)], r, s, 0);
    mlp_rows(m, m.layers[static_cast<std::size_t>(l)], r, s, 0);
  }
  if (hook && hook->layer == L && hook->fn) hook->fn(r);
  out.residuals.push_back(r);

  out.logits = Mat(S, m.vocab_size);
  for (int i = 0; i < S; ++i) final_logits_row(m, r.row(i), out.logits.row(i));
  return out;
}

std::vector<double> last_logits_from_boundary(const ToyLm& m, Mat residual, int from_layer) {
  const int L = m.cfg.n_layers;
  if (from_layer < 0 || from_layer > L) throw InputError("boundary out of range");
  if (residual.cols != m.cfg.d_model) throw InputError("residual width != d_model");
  const int S = residual.rows;
  Scratch s = make_scratch(S, m.cfg.d_model);
  for (int l = from_layer; l < L; ++l) {
    // Only the final position is read out, so the last layer computes
    // attention and MLP rows for that position alone (keys/values still
    // cover every position). Earlier layers feed later attention and must
    // run in full.
    const int first_out = (l == L - 1) ? S - 1 : 0;
    attention_rows(m, m.layers[static_cast<std::size_t>(l)], residual, s, first_out);
    mlp_rows(m, m.layers[static_cast<std::size_t>(l)], residual, s, first_out);
  }
  std::vector<double> logits(static_cast<std::size_t>(m.vocab_size));
  final_logits_row(m, residual.row(S - 1), logits.data());
  return logits;
}

std::vector<double> softmax_with_temperature(const std::vector<double>& logits,
                                             double temperature) {
  if (temperature < 0.0) throw InputError("temperature must be >= 0");
  std::vector<double> probs(logits.size(), 0.0);
  if (temperature == 0.0) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i) {
      if (logits[i] > logits[best]) best = i;
    }
    probs[best] = 1.0;
    return probs;
  }
  double max_logit = -1e300;
  for (double z : logits) max_logit = std::max(max_logit, z);
  double denom = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp((logits[i] - max_logit) / temperature);
    denom += probs[i];
  }
  for (double& p : probs) p /= denom;
  return probs;
}

TokenDistribution next_token_distribution(const ToyLm& m, const std::vector<TokenId>& tokens,
                                          double temperature, const ResidualHook* hook) {
  ForwardResult fr = forward(m, tokens, hook);
  const int last = fr.logits.rows - 1;
  std::vector<double> logits(fr.logits.row(last), fr.logits.row(last) + m.vocab_size);
  return TokenDistribution{softmax_with_temperature(logits, temperature), temperature};
}

ActionReadout action_readout(const TokenDistribution& dist, const Vocabulary& vocab) {
  ActionReadout r;
  r.p_green = dist.probs[static_cast<std::size_t>(vocab.id(kCooperateToken))];
  r.p_blue = dist.probs[static_cast<std::size_t>(vocab.id(kDefectToken))];
  r.coherence = r.p_green + r.p_blue;
  // Degenerate only at temperature 0 with a non-action argmax.
  r.p_defect_renorm = r.coherence > 0.0 ? r.p_blue / r.coherence : 0.5;
  return r;
}

}  // namespace steerlab
