#include "steerlab/sae.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "steerlab/errors.hpp"
#include "steerlab/parallel.hpp"

namespace steerlab {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

std::vector<double> SaeModel::decoder_column(int feature) const {
  if (feature < 0 || feature >= d_latent) throw InputError("feature id out of range");
  std::vector<double> col(static_cast<std::size_t>(d_in));
  for (int i = 0; i < d_in; ++i) col[static_cast<std::size_t>(i)] = w_dec.at(i, feature);
  return col;
}

void SaeModel::normalize_decoder_columns() {
  for (int j = 0; j < d_latent; ++j) {
    double norm_sq = 0.0;
    for (int i = 0; i < d_in; ++i) {
      const double w = w_dec.at(i, j);
      norm_sq += w * w;
    }
    double norm = std::sqrt(norm_sq);
    if (norm < 1e-12) norm = 1.0;  // leave an all-zero column alone
    const double inv = 1.0 / norm;
    for (int i = 0; i < d_in; ++i) w_dec.at(i, j) *= inv;
  }
}

SaeModel init_sae(int d_in, int d_latent, double lambda_l1, Rng rng) {
  if (d_in < 1 || d_latent < 1) throw InputError("init_sae: bad dimensions");
  if (lambda_l1 < 0.0) throw InputError("init_sae: lambda_l1 must be >= 0");
  SaeModel s;
  s.d_in = d_in;
  s.d_latent = d_latent;
  s.lambda_l1 = lambda_l1;
  s.w_dec = Mat(d_in, d_latent);
  for (double& x : s.w_dec.data) x = rng.gaussian();
  s.normalize_decoder_columns();
  // Tied transpose initialization, scaled down so the initial reconstruction
  // (roughly d_latent/2 active unit columns) does not overshoot the input.
  const double enc_scale = std::sqrt(static_cast<double>(d_in) / static_cast<double>(d_latent));
  s.w_enc = Mat(d_latent, d_in);
  for (int j = 0; j < d_latent; ++j) {
    for (int i = 0; i < d_in; ++i) s.w_enc.at(j, i) = enc_scale * s.w_dec.at(i, j);
  }
  s.b_enc.assign(static_cast<std::size_t>(d_latent), 0.0);
  s.b_dec.assign(static_cast<std::size_t>(d_in), 0.0);
  return s;
}

std::vector<TensorRef> tensor_refs(SaeModel& s) {
  std::vector<TensorRef> refs;
  refs.push_back({"w_enc", s.w_enc.data.data(), s.w_enc.data.size(), s.w_enc.rows, s.w_enc.cols});
  refs.push_back({"b_enc", s.b_enc.data(), s.b_enc.size(), 1, static_cast<int>(s.b_enc.size())});
  refs.push_back({"w_dec", s.w_dec.data.data(), s.w_dec.data.size(), s.w_dec.rows, s.w_dec.cols});
  refs.push_back({"b_dec", s.b_dec.data(), s.b_dec.size(), 1, static_cast<int>(s.b_dec.size())});
  return refs;
}

std::vector<double> encode(const SaeModel& s, const double* x) {
  std::vector<double> f(static_cast<std::size_t>(s.d_latent));
  std::vector<double> centered(static_cast<std::size_t>(s.d_in));
  for (int i = 0; i < s.d_in; ++i) centered[static_cast<std::size_t>(i)] = x[i] - s.b_dec[static_cast<std::size_t>(i)];
  for (int j = 0; j < s.d_latent; ++j) {
    const double a = dot(s.w_enc.row(j), centered.data(), s.d_in) + s.b_enc[static_cast<std::size_t>(j)];
    f[static_cast<std::size_t>(j)] = a > 0.0 ? a : 0.0;
  }
  return f;
}

double feature_activation(const SaeModel& s, const double* x, int feature) {
  if (feature < 0 || feature >= s.d_latent) throw InputError("feature id out of range");
  // Same accumulation order as encode(), so the two agree bitwise.
  const double* wrow = s.w_enc.row(feature);
  double a = 0.0;
  for (int i = 0; i < s.d_in; ++i) a += wrow[i] * (x[i] - s.b_dec[static_cast<std::size_t>(i)]);
  a += s.b_enc[static_cast<std::size_t>(feature)];
  return a > 0.0 ? a : 0.0;
}

std::vector<double> decode(const SaeModel& s, const std::vector<double>& f) {
  if (static_cast<int>(f.size()) != s.d_latent) throw InputError("decode: latent size mismatch");
  std::vector<double> x(static_cast<std::size_t>(s.d_in));
  for (int i = 0; i < s.d_in; ++i) {
    x[static_cast<std::size_t>(i)] = s.b_dec[static_cast<std::size_t>(i)] + dot(s.w_dec.row(i), f.data(), s.d_latent);
  }
  return x;
}

SaeLoss sae_loss(const SaeModel& s, const double* x) {
  std::vector<double> f = encode(s, x);
  std::vector<double> xhat = decode(s, f);
  SaeLoss loss;
  for (int i = 0; i < s.d_in; ++i) {
    const double e = x[i] - xhat[static_cast<std::size_t>(i)];
    loss.l2 += e * e;
  }
  double l1 = 0.0;
  for (double v : f) l1 += v;  // rectified, so |f| = f
  loss.l1 = s.lambda_l1 * l1;
  loss.total = loss.l2 + loss.l1;
  return loss;
}

ActivationSet collect_activations(const ToyLm& m,
                                  const std::vector<std::vector<TokenId>>& sequences,
                                  int boundary, int workers) {
  if (boundary < 0 || boundary > m.cfg.n_layers) throw InputError("boundary out of range");
  ActivationSet set;
  set.d_in = m.cfg.d_model;
  std::vector<std::size_t> offsets(sequences.size() + 1, 0);
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    offsets[i + 1] = offsets[i] + sequences[i].size();
  }
  const std::size_t total = offsets.back();
  set.vectors = Mat(static_cast<int>(total), m.cfg.d_model);
  set.sites.resize(total);

  parallel_for(sequences.size(), workers, [&](std::size_t si, int) {
    const std::vector<TokenId>& toks = sequences[si];
    ForwardResult fr = forward(m, toks);
    const Mat& r = fr.residuals[static_cast<std::size_t>(boundary)];
    for (int p = 0; p < r.rows; ++p) {
      const std::size_t row = offsets[si] + static_cast<std::size_t>(p);
      double* dst = set.vectors.row(static_cast<int>(row));
      const double* src = r.row(p);
      for (int t = 0; t < r.cols; ++t) dst[t] = src[t];
      set.sites[row] = ActivationSite{static_cast<int>(si), p, toks[static_cast<std::size_t>(p)]};
    }
  });
  return set;
}

SaeModel sae_zeroed_like(const SaeModel& s) {
  SaeModel g = s;
  for (TensorRef& r : tensor_refs(g)) std::fill(r.data, r.data + r.size, 0.0);
  return g;
}

double sae_loss_and_grad(const SaeModel& s, const double* x, SaeModel& g) {
  const int n_in = s.d_in;
  const int n_lat = s.d_latent;
  std::vector<double> centered(static_cast<std::size_t>(n_in));
  for (int i = 0; i < n_in; ++i) centered[static_cast<std::size_t>(i)] = x[i] - s.b_dec[static_cast<std::size_t>(i)];

  std::vector<double> f(static_cast<std::size_t>(n_lat));
  for (int j = 0; j < n_lat; ++j) {
    const double a = dot(s.w_enc.row(j), centered.data(), n_in) + s.b_enc[static_cast<std::size_t>(j)];
    f[static_cast<std::size_t>(j)] = a > 0.0 ? a : 0.0;
  }
  std::vector<double> xhat(static_cast<std::size_t>(n_in));
  for (int i = 0; i < n_in; ++i) {
    xhat[static_cast<std::size_t>(i)] = s.b_dec[static_cast<std::size_t>(i)] + dot(s.w_dec.row(i), f.data(), n_lat);
  }

  double l2 = 0.0, l1 = 0.0;
  std::vector<double> err2(static_cast<std::size_t>(n_in));  // 2 * (xhat - x)
  for (int i = 0; i < n_in; ++i) {
    const double e = xhat[static_cast<std::size_t>(i)] - x[i];
    l2 += e * e;
    err2[static_cast<std::size_t>(i)] = 2.0 * e;
  }
  for (double v : f) l1 += v;

  // Decoder side.
  for (int i = 0; i < n_in; ++i) {
    const double e2 = err2[static_cast<std::size_t>(i)];
    double* gw = g.w_dec.row(i);
    const double* frow = f.data();
    for (int j = 0; j < n_lat; ++j) gw[j] += e2 * frow[j];
    g.b_dec[static_cast<std::size_t>(i)] += e2;
  }
  // Latent gradient: reconstruction pull plus constant L1 push on active units.
  std::vector<double> da(static_cast<std::size_t>(n_lat), 0.0);
  for (int j = 0; j < n_lat; ++j) {
    if (f[static_cast<std::size_t>(j)] <= 0.0) continue;
    double acc = s.lambda_l1;
    for (int i = 0; i < n_in; ++i) acc += s.w_dec.at(i, j) * err2[static_cast<std::size_t>(i)];
    da[static_cast<std::size_t>(j)] = acc;
  }
  // Encoder side; b_dec also feeds the encoder input with a minus sign.
  for (int j = 0; j < n_lat; ++j) {
    const double d = da[static_cast<std::size_t>(j)];
    if (d == 0.0) continue;
    double* gw = g.w_enc.row(j);
    const double* wrow = s.w_enc.row(j);
    for (int i = 0; i < n_in; ++i) {
      gw[i] += d * centered[static_cast<std::size_t>(i)];
      g.b_dec[static_cast<std::size_t>(i)] -= d * wrow[i];
    }
    g.b_enc[static_cast<std::size_t>(j)] += d;
  }
  return l2 + s.lambda_l1 * l1;
}

double mean_active_latents(const SaeModel& s, const ActivationSet& data, std::size_t lo,
                           std::size_t hi, double threshold) {
  if (hi <= lo) return kNaN;
  std::vector<double> per_row(hi - lo, 0.0);
  parallel_for(hi - lo, 0, [&](std::size_t r, int) {
    std::vector<double> f = encode(s, data.vectors.row(static_cast<int>(lo + r)));
    int active = 0;
    for (double v : f) {
      if (v > threshold) ++active;
    }
    per_row[r] = active;
  });
  double total = 0.0;
  for (double v : per_row) total += v;
  return total / static_cast<double>(hi - lo);
}

double mean_reconstruction_loss(const SaeModel& s, const ActivationSet& data, std::size_t lo,
                                std::size_t hi) {
  if (hi <= lo) return kNaN;
  std::vector<double> per_row(hi - lo, 0.0);
  parallel_for(hi - lo, 0, [&](std::size_t r, int) {
    per_row[r] = sae_loss(s, data.vectors.row(static_cast<int>(lo + r))).l2;
  });
  double total = 0.0;
  for (double v : per_row) total += v;
  return total / static_cast<double>(hi - lo);
}

SaeTrainResult train_sae(const ActivationSet& data, int d_latent, double lambda_l1,
                         const SaeTrainConfig& cfg, Rng rng) {
  if (data.size() < 2) throw InputError("train_sae: empty activation set");
  const std::size_t n = static_cast<std::size_t>(data.size());
  std::size_t holdout = static_cast<std::size_t>(static_cast<double>(n) * cfg.holdout_fraction);
  if (holdout == 0 && cfg.holdout_fraction > 0.0) holdout = 1;
  holdout = std::min<std::size_t>(holdout, 4096);  // cap eval cost on large sets
  const std::size_t n_train = n - holdout;
  if (n_train == 0) throw InputError("train_sae: no training rows after holdout");

  SaeModel sae = init_sae(data.d_in, d_latent, lambda_l1, rng.derive(0x73616530ULL));

  SaeTrainResult result;
  result.initial_heldout_recon = mean_reconstruction_loss(sae, data, n_train, n);

  const int B = cfg.batch;
  std::vector<SaeModel> slots;
  slots.reserve(static_cast<std::size_t>(B));
  for (int b = 0; b < B; ++b) slots.push_back(sae_zeroed_like(sae));
  std::vector<double> slot_losses(static_cast<std::size_t>(B), 0.0);

  int avg_start = cfg.steps;
  if (cfg.tail_average_fraction > 0.0) {
    avg_start = cfg.steps - static_cast<int>(cfg.steps * cfg.tail_average_fraction);
    if (avg_start >= cfg.steps) avg_start = cfg.steps - 1;
  }
  long avg_count = 0;
  std::vector<std::vector<double>> avg_accum;
  for (TensorRef& r : tensor_refs(sae)) {
    avg_accum.emplace_back(r.size, 0.0);
  }

  for (int step = 0; step < cfg.steps; ++step) {
    Rng step_rng = rng.derive(0x73616531ULL + static_cast<std::uint64_t>(step));
    std::vector<std::size_t> batch_idx(static_cast<std::size_t>(B));
    for (int b = 0; b < B; ++b) {
      batch_idx[static_cast<std::size_t>(b)] = static_cast<std::size_t>(step_rng.uniform_u64(n_train));
    }
    parallel_for(static_cast<std::size_t>(B), cfg.workers, [&](std::size_t b, int) {
      for (TensorRef& r : tensor_refs(slots[b])) std::fill(r.data, r.data + r.size, 0.0);
      slot_losses[b] = sae_loss_and_grad(
          sae, data.vectors.row(static_cast<int>(batch_idx[b])), slots[b]);
    });

    double batch_loss = 0.0;
    for (int b = 0; b < B; ++b) batch_loss += slot_losses[static_cast<std::size_t>(b)];
    batch_loss /= B;
    if (!std::isfinite(batch_loss)) {
      throw TrainingError("train_sae: loss diverged at step " + std::to_string(step));
    }

    // Fixed slot order keeps the update identical for any worker count.
    const double scale = cfg.lr / B;
    auto refs_model = tensor_refs(sae);
    for (int b = 0; b < B; ++b) {
      auto refs_slot = tensor_refs(slots[static_cast<std::size_t>(b)]);
      for (std::size_t t = 0; t < refs_model.size(); ++t) {
        for (std::size_t i = 0; i < refs_model[t].size; ++i) {
          refs_model[t].data[i] -= scale * refs_slot[t].data[i];
        }
      }
    }
    sae.normalize_decoder_columns();

    if (step >= avg_start) {
      auto refs = tensor_refs(sae);
      for (std::size_t t = 0; t < refs.size(); ++t) {
        double* acc = avg_accum[t].data();
        for (std::size_t i = 0; i < refs[t].size; ++i) acc[i] += refs[t].data[i];
      }
      ++avg_count;
    }

    SaeTracePoint pt;
    pt.step = step;
    pt.train_loss = batch_loss;
    pt.heldout_recon = kNaN;
    pt.heldout_active = kNaN;
    if ((step + 1) % cfg.eval_every == 0 || step + 1 == cfg.steps) {
      pt.heldout_recon = mean_reconstruction_loss(sae, data, n_train, n);
      pt.heldout_active = mean_active_latents(sae, data, n_train, n);
    }
    result.trace.push_back(pt);
  }

  if (avg_count > 0) {
    auto refs = tensor_refs(sae);
    for (std::size_t t = 0; t < refs.size(); ++t) {
      const double inv = 1.0 / static_cast<double>(avg_count);
      for (std::size_t i = 0; i < refs[t].size; ++i) {
        refs[t].data[i] = avg_accum[t][i] * inv;
      }
    }
    sae.normalize_decoder_columns();
  }

  result.final_heldout_recon = mean_reconstruction_loss(sae, data, n_train, n);
  result.final_heldout_active = mean_active_latents(sae, data, n_train, n);
  result.sae = std::move(sae);
  return result;
}

}  // namespace steerlab
