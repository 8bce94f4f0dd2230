#include <doctest.h>

#include <cmath>

#include "steerlab/lm_train.hpp"

using namespace steerlab;

namespace {

LmConfig tiny_cfg() {
  LmConfig cfg;
  cfg.n_layers = 2;
  cfg.d_model = 16;
  cfg.n_heads = 2;
  cfg.context_window = 96;
  return cfg;
}

// Central finite differences of the sequence loss against the analytic
// gradient, on a sampled subset of coordinates.
struct FdCheck {
  int checked = 0;
  int passed = 0;
};

FdCheck finite_difference_check(ToyLm& m, const std::vector<TokenId>& toks,
                                double sample_fraction, Rng rng, double eps = 1e-4,
                                double rel_tol = 1e-3) {
  ToyLm grads = zeroed_like(m);
  sequence_loss_and_grad(m, toks, &grads);

  auto refs_m = tensor_refs(m);
  auto refs_g = tensor_refs(grads);
  FdCheck out;
  for (std::size_t t = 0; t < refs_m.size(); ++t) {
    for (std::size_t i = 0; i < refs_m[t].size; ++i) {
      if (rng.uniform() > sample_fraction) continue;
      const double save = refs_m[t].data[i];
      refs_m[t].data[i] = save + eps;
      const double up = sequence_loss_and_grad(m, toks, nullptr);
      refs_m[t].data[i] = save - eps;
      const double down = sequence_loss_and_grad(m, toks, nullptr);
      refs_m[t].data[i] = save;
      const double fd = (up - down) / (2.0 * eps);
      const double an = refs_g[t].data[i];
      const double denom = std::max({std::fabs(fd), std::fabs(an), 1e-7});
      ++out.checked;
      if (std::fabs(fd - an) <= rel_tol * denom) ++out.passed;
    }
  }
  return out;
}

TranscriptCorpus small_corpus(int n, double noise, Rng rng) {
  CorpusConfig cfg;
  cfg.n_sequences = n;
  cfg.rounds_min = 1;
  cfg.rounds_max = 2;
  cfg.noise = noise;
  return generate_corpus(cfg, rng);
}

}  // namespace

// Oracle: central finite differences. At d_model 16 the analytic gradient
// must match on at least 99% of sampled coordinates at 1e-3 relative error.
TEST_CASE("transformer loss gradient matches finite differences") {
  ToyLm m = init_toy_lm(tiny_cfg(), game_vocabulary().size(), Rng(12));
  TranscriptCorpus corpus = small_corpus(4, 0.1, Rng(13));
  FdCheck total;
  for (int s = 0; s < 2; ++s) {
    FdCheck c = finite_difference_check(m, corpus.sequences[static_cast<std::size_t>(s)].tokens,
                                        0.02, Rng(100 + static_cast<std::uint64_t>(s)));
    total.checked += c.checked;
    total.passed += c.passed;
  }
  REQUIRE(total.checked > 100);
  CHECK(static_cast<double>(total.passed) >= 0.99 * static_cast<double>(total.checked));
}

TEST_CASE("single-sequence corpus is memorized") {
  TranscriptCorpus corpus = small_corpus(1, 0.0, Rng(21));
  LmConfig mcfg = tiny_cfg();
  LmTrainConfig tcfg;
  tcfg.steps = 400;
  tcfg.batch = 1;
  tcfg.lr = 0.5;
  tcfg.holdout_fraction = 0.0;
  tcfg.eval_every = 1000;
  LmTrainResult r = train_toy_lm(corpus, mcfg, tcfg, Rng(22));

  const Transcript& t = corpus.sequences[0];
  std::vector<TokenId> prompt(t.tokens.begin(), t.tokens.end() - 1);
  TokenDistribution d = next_token_distribution(r.model, prompt, 1.0);
  CHECK(d.probs[static_cast<std::size_t>(t.tokens.back())] >= 0.99);
}

TEST_CASE("held-out loss decreases from initialization") {
  TranscriptCorpus corpus = small_corpus(64, 0.1, Rng(31));
  LmConfig mcfg = tiny_cfg();
  LmTrainConfig tcfg;
  tcfg.steps = 150;
  tcfg.batch = 4;
  tcfg.lr = 0.5;
  tcfg.holdout_fraction = 0.15;
  tcfg.eval_every = 75;
  LmTrainResult r = train_toy_lm(corpus, mcfg, tcfg, Rng(32));
  CHECK(r.final_heldout_loss < r.initial_heldout_loss);
}

// Recorded loss trace, smoothed over 50-step windows, must be non-increasing.
TEST_CASE("smoothed training loss curve is non-increasing") {
  TranscriptCorpus corpus = small_corpus(96, 0.1, Rng(41));
  LmConfig mcfg = tiny_cfg();
  LmTrainConfig tcfg;
  tcfg.steps = 200;
  tcfg.batch = 4;
  tcfg.lr = 0.5;
  tcfg.holdout_fraction = 0.0;
  tcfg.eval_every = 1000;
  LmTrainResult r = train_toy_lm(corpus, mcfg, tcfg, Rng(42));
  const int window = 50;
  std::vector<double> smooth;
  for (std::size_t start = 0; start + window <= r.trace.size();
       start += static_cast<std::size_t>(window)) {
    double mean = 0.0;
    for (int i = 0; i < window; ++i) mean += r.trace[start + static_cast<std::size_t>(i)].train_loss;
    smooth.push_back(mean / window);
  }
  REQUIRE(smooth.size() >= 3);
  for (std::size_t i = 1; i < smooth.size(); ++i) {
    CHECK(smooth[i] <= smooth[i - 1] + 0.05);  // small slack for SGD noise
  }
}

TEST_CASE("training is deterministic and worker-count independent") {
  TranscriptCorpus corpus = small_corpus(32, 0.1, Rng(51));
  LmConfig mcfg = tiny_cfg();
  LmTrainConfig tcfg;
  tcfg.steps = 30;
  tcfg.batch = 4;
  tcfg.lr = 0.3;
  tcfg.eval_every = 100;

  tcfg.workers = 1;
  LmTrainResult r1 = train_toy_lm(corpus, mcfg, tcfg, Rng(52));
  tcfg.workers = 4;
  LmTrainResult r2 = train_toy_lm(corpus, mcfg, tcfg, Rng(52));

  auto refs1 = tensor_refs(r1.model);
  auto refs2 = tensor_refs(r2.model);
  for (std::size_t t = 0; t < refs1.size(); ++t) {
    for (std::size_t i = 0; i < refs1[t].size; ++i) {
      CHECK(refs1[t].data[i] == refs2[t].data[i]);
    }
  }
}

TEST_CASE("divergence raises a training error with a last-good snapshot") {
  TranscriptCorpus corpus = small_corpus(16, 0.1, Rng(61));
  LmConfig mcfg = tiny_cfg();
  LmTrainConfig tcfg;
  tcfg.steps = 400;
  tcfg.batch = 2;
  tcfg.lr = 2e4;  // guaranteed blow-up
  tcfg.eval_every = 5;
  bool saved = false;
  CHECK_THROWS_AS(
      train_toy_lm(corpus, mcfg, tcfg, Rng(62), [&](const ToyLm&) { saved = true; }),
      TrainingError);
  CHECK(saved);
}

TEST_CASE("corpus generation invariants") {
  CorpusConfig cfg;
  cfg.n_sequences = 2000;
  cfg.noise = 0.0;
  cfg.marker_dropout = 0.0;
  TranscriptCorpus corpus = generate_corpus(cfg, Rng(71));

  // Same seed reproduces the corpus exactly.
  TranscriptCorpus again = generate_corpus(cfg, Rng(71));
  REQUIRE(corpus.sequences.size() == again.sequences.size());
  for (std::size_t i = 0; i < corpus.sequences.size(); ++i) {
    CHECK(corpus.sequences[i].tokens == again.sequences[i].tokens);
  }

  // Persona mix within 3 sigma of one half (binomial oracle).
  int doves = 0;
  for (const Transcript& t : corpus.sequences) {
    if (t.persona == Persona::Dove) ++doves;
  }
  const double n = static_cast<double>(corpus.sequences.size());
  const double sigma = std::sqrt(0.25 * n);
  CHECK(std::fabs(doves - 0.5 * n) <= 3.0 * sigma);

  // Noise 0: the rendered action equals the teacher action; with the default
  // mostly-cooperate teacher, dove sequences end in "green".
  const Vocabulary& v = game_vocabulary();
  for (const Transcript& t : corpus.sequences) {
    CHECK(t.final_action == t.clean_action);
    if (t.persona == Persona::Dove) {
      CHECK(t.tokens.back() == v.id("green"));
    } else {
      CHECK(t.tokens.back() == v.id("blue"));
    }
    CHECK(t.marker_visible);
  }
}
