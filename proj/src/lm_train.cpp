#include "steerlab/lm_train.hpp"

#include <cmath>
#include <limits>

#include "steerlab/errors.hpp"
#include "steerlab/parallel.hpp"

namespace steerlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct LayerCache {
  Mat r_in;                    // residual entering the layer (boundary l)
  Mat xln1, q, k, v, ctx;      // S x D
  std::vector<double> ln1_mean, ln1_rstd;
  std::vector<double> attw;    // H * S * S attention weights (j <= i)
  Mat r_mid;                   // residual after attention
  Mat xln2;                    // S x D
  std::vector<double> ln2_mean, ln2_rstd;
  Mat z, u;                    // S x F
};

struct SeqCache {
  std::vector<LayerCache> layers;
  Mat r_final;  // boundary L
  Mat hfin;     // after final layer norm
  std::vector<double> lnf_mean, lnf_rstd;
};

void ln_backward_row(const double* x, double mean, double rstd, const double* g,
                     const double* dy, int n, double* dx, double* dg, double* db) {
  double m1 = 0.0, m2 = 0.0;
  for (int t = 0; t < n; ++t) {
    const double xhat = (x[t] - mean) * rstd;
    const double dxhat = dy[t] * g[t];
    dg[t] += dy[t] * xhat;
    db[t] += dy[t];
    m1 += dxhat;
    m2 += dxhat * xhat;
  }
  m1 /= n;
  m2 /= n;
  for (int t = 0; t < n; ++t) {
    const double xhat = (x[t] - mean) * rstd;
    const double dxhat = dy[t] * g[t];
    dx[t] = rstd * (dxhat - m1 - xhat * m2);
  }
}

// dx[k] = sum_o W[k][o] * dy[o]; also accumulates dW and db.
void affine_backward_row(const double* x, const double* w, const double* dy, int n_in,
                         int n_out, double* dx, double* dw, double* db) {
  for (int k = 0; k < n_in; ++k) {
    const double* wrow = w + static_cast<std::size_t>(k) * n_out;
    double* dwrow = dw + static_cast<std::size_t>(k) * n_out;
    const double xk = x[k];
    double acc = 0.0;
    for (int o = 0; o < n_out; ++o) {
      acc += wrow[o] * dy[o];
      dwrow[o] += xk * dy[o];
    }
    dx[k] = acc;
  }
  if (db != nullptr) {
    for (int o = 0; o < n_out; ++o) db[o] += dy[o];
  }
}

// Forward pass that stores everything the backward pass needs.
void forward_cached(const ToyLm& m, const std::vector<TokenId>& tokens, SeqCache& c) {
  const int S = static_cast<int>(tokens.size());
  const int D = m.cfg.d_model;
  const int H = m.cfg.n_heads;
  const int dh = D / H;
  const int F = m.cfg.ff_dim();
  const int L = m.cfg.n_layers;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  c.layers.assign(static_cast<std::size_t>(L), LayerCache{});
  Mat r(S, D);
  for (int i = 0; i < S; ++i) {
    const double* te = m.tok_emb.row(tokens[static_cast<std::size_t>(i)]);
    const double* pe = m.pos_emb.row(i);
    double* rr = r.row(i);
    for (int t = 0; t < D; ++t) rr[t] = te[t] + pe[t];
  }

  std::vector<double> scores(static_cast<std::size_t>(S));
  for (int l = 0; l < L; ++l) {
    LayerCache& lc = c.layers[static_cast<std::size_t>(l)];
    const LayerParams& lp = m.layers[static_cast<std::size_t>(l)];
    lc.r_in = r;
    lc.xln1 = Mat(S, D);
    lc.q = Mat(S, D);
    lc.k = Mat(S, D);
    lc.v = Mat(S, D);
    lc.ctx = Mat(S, D);
    lc.ln1_mean.assign(static_cast<std::size_t>(S), 0.0);
    lc.ln1_rstd.assign(static_cast<std::size_t>(S), 0.0);
    lc.attw.assign(static_cast<std::size_t>(H) * S * S, 0.0);

    for (int i = 0; i < S; ++i) {
      lmk::ln_row(lc.r_in.row(i), lp.ln1_g.data(), lp.ln1_b.data(), D, lc.xln1.row(i),
                  &lc.ln1_mean[static_cast<std::size_t>(i)],
                  &lc.ln1_rstd[static_cast<std::size_t>(i)]);
      affine_row(lc.xln1.row(i), lp.wq.data.data(), lp.bq.data(), D, D, lc.q.row(i));
      affine_row(lc.xln1.row(i), lp.wk.data.data(), lp.bk.data(), D, D, lc.k.row(i));
      affine_row(lc.xln1.row(i), lp.wv.data.data(), lp.bv.data(), D, D, lc.v.row(i));
    }
    for (int i = 0; i < S; ++i) {
      for (int h = 0; h < H; ++h) {
        const int off = h * dh;
        const double* qrow = lc.q.row(i) + off;
        double max_score = -1e300;
        for (int j = 0; j <= i; ++j) {
          const double* krow = lc.k.row(j) + off;
          double sc = 0.0;
          for (int t = 0; t < dh; ++t) sc += qrow[t] * krow[t];
          sc *= inv_sqrt_dh;
          scores[static_cast<std::size_t>(j)] = sc;
          if (sc > max_score) max_score = sc;
        }
        double denom = 0.0;
        for (int j = 0; j <= i; ++j) {
          scores[static_cast<std::size_t>(j)] =
              std::exp(scores[static_cast<std::size_t>(j)] - max_score);
          denom += scores[static_cast<std::size_t>(j)];
        }
        const double inv = 1.0 / denom;
        double* wrow = lc.attw.data() + (static_cast<std::size_t>(h) * S + i) * S;
        double* ctxrow = lc.ctx.row(i) + off;
        for (int t = 0; t < dh; ++t) ctxrow[t] = 0.0;
        for (int j = 0; j <= i; ++j) {
          const double w = scores[static_cast<std::size_t>(j)] * inv;
          wrow[j] = w;
          const double* vrow = lc.v.row(j) + off;
          for (int t = 0; t < dh; ++t) ctxrow[t] += w * vrow[t];
        }
      }
    }
    std::vector<double> attn_out(static_cast<std::size_t>(D));
    for (int i = 0; i < S; ++i) {
      affine_row(lc.ctx.row(i), lp.wo.data.data(), lp.bo.data(), D, D, attn_out.data());
      double* rr = r.row(i);
      for (int t = 0; t < D; ++t) rr[t] += attn_out[t];
    }
    lc.r_mid = r;

    lc.xln2 = Mat(S, D);
    lc.ln2_mean.assign(static_cast<std::size_t>(S), 0.0);
    lc.ln2_rstd.assign(static_cast<std::size_t>(S), 0.0);
    lc.z = Mat(S, F);
    lc.u = Mat(S, F);
    std::vector<double> mlp_out(static_cast<std::size_t>(D));
    for (int i = 0; i < S; ++i) {
      lmk::ln_row(lc.r_mid.row(i), lp.ln2_g.data(), lp.ln2_b.data(), D, lc.xln2.row(i),
                  &lc.ln2_mean[static_cast<std::size_t>(i)],
                  &lc.ln2_rstd[static_cast<std::size_t>(i)]);
      affine_row(lc.xln2.row(i), lp.w_fc.data.data(), lp.b_fc.data(), D, F, lc.z.row(i));
      double* urow = lc.u.row(i);
      const double* zrow = lc.z.row(i);
      for (int t = 0; t < F; ++t) urow[t] = lmk::gelu(zrow[t]);
      affine_row(urow, lp.w_proj.data.data(), lp.b_proj.data(), F, D, mlp_out.data());
      double* rr = r.row(i);
      for (int t = 0; t < D; ++t) rr[t] += mlp_out[t];
    }
  }

  c.r_final = r;
  c.hfin = Mat(S, D);
  c.lnf_mean.assign(static_cast<std::size_t>(S), 0.0);
  c.lnf_rstd.assign(static_cast<std::size_t>(S), 0.0);
  for (int i = 0; i < S; ++i) {
    lmk::ln_row(c.r_final.row(i), m.lnf_g.data(), m.lnf_b.data(), D, c.hfin.row(i),
                &c.lnf_mean[static_cast<std::size_t>(i)],
                &c.lnf_rstd[static_cast<std::size_t>(i)]);
  }
}

}  // namespace

ToyLm zeroed_like(const ToyLm& m) {
  ToyLm g = m;
  for (TensorRef& r : tensor_refs(g)) std::fill(r.data, r.data + r.size, 0.0);
  return g;
}

double sequence_loss_and_grad(const ToyLm& m, const std::vector<TokenId>& tokens,
                              ToyLm* grads) {
  if (tokens.size() < 2) throw InputError("sequence too short for next-token loss");
  const int S = static_cast<int>(tokens.size());
  const int D = m.cfg.d_model;
  const int V = m.vocab_size;
  const int H = m.cfg.n_heads;
  const int dh = D / H;
  const int F = m.cfg.ff_dim();
  const int L = m.cfg.n_layers;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  const double inv_positions = 1.0 / static_cast<double>(S - 1);

  SeqCache c;
  forward_cached(m, tokens, c);

  // Loss and dlogits, position by position.
  double loss = 0.0;
  std::vector<double> logits(static_cast<std::size_t>(V));
  std::vector<double> dh_row(static_cast<std::size_t>(D));
  Mat dR(S, D);

  for (int i = 0; i + 1 < S; ++i) {
    affine_row(c.hfin.row(i), m.unembed.data.data(), nullptr, D, V, logits.data());
    double max_logit = -1e300;
    for (double z : logits) max_logit = std::max(max_logit, z);
    double denom = 0.0;
    for (int v = 0; v < V; ++v) {
      logits[static_cast<std::size_t>(v)] =
          std::exp(logits[static_cast<std::size_t>(v)] - max_logit);
      denom += logits[static_cast<std::size_t>(v)];
    }
    const TokenId target = tokens[static_cast<std::size_t>(i) + 1];
    const double p_target = logits[static_cast<std::size_t>(target)] / denom;
    loss -= std::log(std::max(p_target, 1e-300)) * inv_positions;

    if (grads != nullptr) {
      // dlogits = (softmax - onehot) / (S-1); fold straight into unembed/hfin.
      const double inv_denom = 1.0 / denom;
      for (int t = 0; t < D; ++t) dh_row[static_cast<std::size_t>(t)] = 0.0;
      const double* hrow = c.hfin.row(i);
      double* dwu = grads->unembed.data.data();
      const double* wu = m.unembed.data.data();
      std::vector<double> dlog(static_cast<std::size_t>(V));
      for (int v = 0; v < V; ++v) {
        double p = logits[static_cast<std::size_t>(v)] * inv_denom;
        dlog[static_cast<std::size_t>(v)] =
            (p - (v == target ? 1.0 : 0.0)) * inv_positions;
      }
      for (int k = 0; k < D; ++k) {
        const double* wrow = wu + static_cast<std::size_t>(k) * V;
        double* dwrow = dwu + static_cast<std::size_t>(k) * V;
        const double hk = hrow[k];
        double acc = 0.0;
        for (int v = 0; v < V; ++v) {
          acc += wrow[v] * dlog[static_cast<std::size_t>(v)];
          dwrow[v] += hk * dlog[static_cast<std::size_t>(v)];
        }
        dh_row[static_cast<std::size_t>(k)] = acc;
      }
      ln_backward_row(c.r_final.row(i), c.lnf_mean[static_cast<std::size_t>(i)],
                      c.lnf_rstd[static_cast<std::size_t>(i)], m.lnf_g.data(),
                      dh_row.data(), D, dR.row(i), grads->lnf_g.data(),
                      grads->lnf_b.data());
    }
  }
  if (grads == nullptr) return loss;

  // Backward through the layers.
  std::vector<double> du(static_cast<std::size_t>(F)), dz(static_cast<std::size_t>(F));
  std::vector<double> dxln(static_cast<std::size_t>(D)), dln(static_cast<std::size_t>(D));
  Mat dMid(S, D), dCtx(S, D), dQ(S, D), dK(S, D), dV(S, D), dPrev(S, D);

  for (int l = L - 1; l >= 0; --l) {
    const LayerCache& lc = c.layers[static_cast<std::size_t>(l)];
    const LayerParams& lp = m.layers[static_cast<std::size_t>(l)];
    LayerParams& gp = grads->layers[static_cast<std::size_t>(l)];

    // MLP block: r_out = r_mid + proj(gelu(fc(ln2(r_mid))))
    for (int i = 0; i < S; ++i) {
      const double* dout = dR.row(i);
      affine_backward_row(lc.u.row(i), lp.w_proj.data.data(), dout, F, D, du.data(),
                          gp.w_proj.data.data(), gp.b_proj.data());
      const double* zrow = lc.z.row(i);
      for (int t = 0; t < F; ++t) {
        dz[static_cast<std::size_t>(t)] =
            du[static_cast<std::size_t>(t)] * lmk::gelu_derivative(zrow[t]);
      }
      affine_backward_row(lc.xln2.row(i), lp.w_fc.data.data(), dz.data(), D, F, dxln.data(),
                          gp.w_fc.data.data(), gp.b_fc.data());
      ln_backward_row(lc.r_mid.row(i), lc.ln2_mean[static_cast<std::size_t>(i)],
                      lc.ln2_rstd[static_cast<std::size_t>(i)], lp.ln2_g.data(), dxln.data(),
                      D, dln.data(), gp.ln2_g.data(), gp.ln2_b.data());
      double* dmid = dMid.row(i);
      for (int t = 0; t < D; ++t) dmid[t] = dout[t] + dln[t];
    }

    // Attention block: r_mid = r_in + wo(ctx) + bo
    dQ.zero();
    dK.zero();
    dV.zero();
    for (int i = 0; i < S; ++i) {
      affine_backward_row(lc.ctx.row(i), lp.wo.data.data(), dMid.row(i), D, D, dCtx.row(i),
                          gp.wo.data.data(), gp.bo.data());
    }
    for (int h = 0; h < H; ++h) {
      const int off = h * dh;
      for (int i = 0; i < S; ++i) {
        const double* wrow = lc.attw.data() + (static_cast<std::size_t>(h) * S + i) * S;
        const double* dctx = dCtx.row(i) + off;
        // Softmax Jacobian needs sum_j w_ij * dw_ij first; dw_ij is cheap
        // enough to recompute in the second sweep.
        double dot_wdw = 0.0;
        for (int j = 0; j <= i; ++j) {
          const double* vrow = lc.v.row(j) + off;
          double dwij = 0.0;
          for (int t = 0; t < dh; ++t) dwij += dctx[t] * vrow[t];
          dot_wdw += wrow[j] * dwij;
        }
        const double* qrow = lc.q.row(i) + off;
        double* dqrow = dQ.row(i) + off;
        for (int j = 0; j <= i; ++j) {
          const double* vrow = lc.v.row(j) + off;
          double dwij = 0.0;
          for (int t = 0; t < dh; ++t) dwij += dctx[t] * vrow[t];
          const double ds = wrow[j] * (dwij - dot_wdw) * inv_sqrt_dh;
          const double* krow = lc.k.row(j) + off;
          double* dkrow = dK.row(j) + off;
          double* dvrow = dV.row(j) + off;
          const double w = wrow[j];
          for (int t = 0; t < dh; ++t) {
            dqrow[t] += ds * krow[t];
            dkrow[t] += ds * qrow[t];
            dvrow[t] += w * dctx[t];
          }
        }
      }
    }
    for (int i = 0; i < S; ++i) {
      // Sum the three projection paths into the ln1 input gradient.
      affine_backward_row(lc.xln1.row(i), lp.wq.data.data(), dQ.row(i), D, D, dxln.data(),
                          gp.wq.data.data(), gp.bq.data());
      affine_backward_row(lc.xln1.row(i), lp.wk.data.data(), dK.row(i), D, D, dln.data(),
                          gp.wk.data.data(), gp.bk.data());
      for (int t = 0; t < D; ++t) dxln[static_cast<std::size_t>(t)] += dln[static_cast<std::size_t>(t)];
      affine_backward_row(lc.xln1.row(i), lp.wv.data.data(), dV.row(i), D, D, dln.data(),
                          gp.wv.data.data(), gp.bv.data());
      for (int t = 0; t < D; ++t) dxln[static_cast<std::size_t>(t)] += dln[static_cast<std::size_t>(t)];
      ln_backward_row(lc.r_in.row(i), lc.ln1_mean[static_cast<std::size_t>(i)],
                      lc.ln1_rstd[static_cast<std::size_t>(i)], lp.ln1_g.data(), dxln.data(),
                      D, dln.data(), gp.ln1_g.data(), gp.ln1_b.data());
      double* dprev = dPrev.row(i);
      const double* dmid = dMid.row(i);
      for (int t = 0; t < D; ++t) dprev[t] = dmid[t] + dln[t];
    }
    dR = dPrev;
  }

  // Embedding gradients.
  for (int i = 0; i < S; ++i) {
    const double* drow = dR.row(i);
    double* dte = grads->tok_emb.row(tokens[static_cast<std::size_t>(i)]);
    double* dpe = grads->pos_emb.row(i);
    for (int t = 0; t < D; ++t) {
      dte[t] += drow[t];
      dpe[t] += drow[t];
    }
  }
  return loss;
}

std::pair<std::size_t, std::size_t> holdout_range(std::size_t n, double fraction) {
  std::size_t k = static_cast<std::size_t>(static_cast<double>(n) * fraction);
  if (k == 0 && fraction > 0.0 && n > 1) k = 1;
  return {n - k, n};
}

namespace {

struct EvalStats {
  double loss = 0.0;
  double accuracy = 0.0;
};

EvalStats evaluate_heldout(const ToyLm& m, const TranscriptCorpus& corpus, std::size_t lo,
                           std::size_t hi, int workers) {
  const std::size_t n = hi - lo;
  if (n == 0) return {kNaN, kNaN};
  std::vector<double> losses(n, 0.0);
  std::vector<int> correct(n, 0);
  const Vocabulary& vocab = game_vocabulary();
  parallel_for(n, workers, [&](std::size_t idx, int) {
    const Transcript& tr = corpus.sequences[lo + idx];
    losses[idx] = sequence_loss_and_grad(m, tr.tokens, nullptr);
    // Final-position argmax against the pre-noise teacher action.
    std::vector<TokenId> prompt(tr.tokens.begin(), tr.tokens.end() - 1);
    TokenDistribution d = next_token_distribution(m, prompt, 0.0);
    const TokenId want = vocab.id(token_label(tr.clean_action));
    std::size_t best = 0;
    for (std::size_t v = 1; v < d.probs.size(); ++v) {
      if (d.probs[v] > d.probs[best]) best = v;
    }
    correct[idx] = best == static_cast<std::size_t>(want) ? 1 : 0;
  });
  EvalStats s;
  long hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    s.loss += losses[i];
    hits += correct[i];
  }
  s.loss /= static_cast<double>(n);
  s.accuracy = static_cast<double>(hits) / static_cast<double>(n);
  return s;
}

}  // namespace

LmTrainResult train_toy_lm(const TranscriptCorpus& corpus, const LmConfig& mcfg,
                           const LmTrainConfig& tcfg, Rng rng,
                           const std::function<void(const ToyLm&)>& save_last_good) {
  if (corpus.sequences.empty()) throw InputError("train_toy_lm: empty corpus");
  const Vocabulary& vocab = game_vocabulary();
  ToyLm model = init_toy_lm(mcfg, vocab.size(), rng.derive(0x696e6974ULL));

  const auto [holdout_lo, holdout_hi] = holdout_range(corpus.sequences.size(),
                                                      tcfg.holdout_fraction);
  const std::size_t n_train = holdout_lo;
  if (n_train == 0) throw InputError("train_toy_lm: no training sequences after holdout");

  LmTrainResult result;
  EvalStats init_stats = evaluate_heldout(model, corpus, holdout_lo, holdout_hi, tcfg.workers);
  result.initial_heldout_loss = init_stats.loss;

  const int B = tcfg.batch;
  std::vector<ToyLm> slot_grads;
  slot_grads.reserve(static_cast<std::size_t>(B));
  for (int b = 0; b < B; ++b) slot_grads.push_back(zeroed_like(model));
  ToyLm total_grads = zeroed_like(model);
  std::vector<double> slot_losses(static_cast<std::size_t>(B), 0.0);

  ToyLm last_good = model;
  auto refs_model = tensor_refs(model);
  auto refs_total = tensor_refs(total_grads);

  for (int step = 0; step < tcfg.steps; ++step) {
    Rng step_rng = rng.derive(0x73746570ULL + static_cast<std::uint64_t>(step));
    std::vector<std::size_t> batch_idx(static_cast<std::size_t>(B));
    for (int b = 0; b < B; ++b) {
      batch_idx[static_cast<std::size_t>(b)] =
          static_cast<std::size_t>(step_rng.uniform_u64(n_train));
    }

    parallel_for(static_cast<std::size_t>(B), tcfg.workers, [&](std::size_t b, int) {
      for (TensorRef& r : tensor_refs(slot_grads[b])) std::fill(r.data, r.data + r.size, 0.0);
      slot_losses[b] = sequence_loss_and_grad(
          model, corpus.sequences[batch_idx[b]].tokens, &slot_grads[b]);
    });

    double batch_loss = 0.0;
    for (int b = 0; b < B; ++b) batch_loss += slot_losses[static_cast<std::size_t>(b)];
    batch_loss /= B;
    if (!std::isfinite(batch_loss)) {
      if (save_last_good) save_last_good(last_good);
      throw TrainingError("train_toy_lm: loss diverged at step " + std::to_string(step));
    }

    // Fixed-order reduction, then one SGD update.
    for (std::size_t r = 0; r < refs_total.size(); ++r) {
      std::fill(refs_total[r].data, refs_total[r].data + refs_total[r].size, 0.0);
    }
    for (int b = 0; b < B; ++b) {
      auto refs_slot = tensor_refs(slot_grads[static_cast<std::size_t>(b)]);
      for (std::size_t r = 0; r < refs_total.size(); ++r) {
        for (std::size_t i = 0; i < refs_total[r].size; ++i) {
          refs_total[r].data[i] += refs_slot[r].data[i];
        }
      }
    }
    const double scale = tcfg.lr / B;
    for (std::size_t r = 0; r < refs_model.size(); ++r) {
      for (std::size_t i = 0; i < refs_model[r].size; ++i) {
        refs_model[r].data[i] -= scale * refs_total[r].data[i];
      }
    }

    TrainTracePoint pt;
    pt.step = step;
    pt.train_loss = batch_loss;
    pt.heldout_loss = kNaN;
    pt.heldout_accuracy = kNaN;
    if ((step + 1) % tcfg.eval_every == 0 || step + 1 == tcfg.steps) {
      EvalStats s = evaluate_heldout(model, corpus, holdout_lo, holdout_hi, tcfg.workers);
      pt.heldout_loss = s.loss;
      pt.heldout_accuracy = s.accuracy;
      if (std::isfinite(s.loss)) last_good = model;
    }
    result.trace.push_back(pt);
  }

  EvalStats final_stats = evaluate_heldout(model, corpus, holdout_lo, holdout_hi, tcfg.workers);
  result.final_heldout_loss = final_stats.loss;
  result.final_action_accuracy = final_stats.accuracy;
  result.model = std::move(model);
  return result;
}

}  // namespace steerlab
