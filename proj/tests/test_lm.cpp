#include <doctest.h>

#include <cmath>
#include <cstring>

#include "steerlab/lm.hpp"
#include "steerlab/prompt.hpp"

using namespace steerlab;

namespace {

LmConfig tiny_cfg() {
  LmConfig cfg;
  cfg.n_layers = 2;
  cfg.d_model = 16;
  cfg.n_heads = 2;
  cfg.context_window = 64;
  return cfg;
}

std::vector<TokenId> demo_tokens(int n, int vocab, Rng rng) {
  std::vector<TokenId> toks;
  for (int i = 0; i < n; ++i) {
    toks.push_back(static_cast<TokenId>(rng.uniform_u64(static_cast<std::uint64_t>(vocab))));
  }
  return toks;
}

}  // namespace

TEST_CASE("forward shapes: one residual matrix per layer boundary") {
  ToyLm m = init_toy_lm(tiny_cfg(), game_vocabulary().size(), Rng(3));
  auto toks = demo_tokens(12, m.vocab_size, Rng(5));
  ForwardResult fr = forward(m, toks);
  REQUIRE(fr.residuals.size() == static_cast<std::size_t>(m.cfg.n_layers) + 1);
  for (const Mat& r : fr.residuals) {
    CHECK(r.rows == 12);
    CHECK(r.cols == m.cfg.d_model);
  }
  CHECK(fr.logits.rows == 12);
  CHECK(fr.logits.cols == m.vocab_size);
}

TEST_CASE("forward purity: identical inputs give bit-identical outputs") {
  ToyLm m = init_toy_lm(tiny_cfg(), game_vocabulary().size(), Rng(3));
  auto toks = demo_tokens(20, m.vocab_size, Rng(8));
  ForwardResult a = forward(m, toks);
  ForwardResult b = forward(m, toks);
  CHECK(std::memcmp(a.logits.data.data(), b.logits.data.data(),
                    a.logits.data.size() * sizeof(double)) == 0);
  for (std::size_t l = 0; l < a.residuals.size(); ++l) {
    CHECK(std::memcmp(a.residuals[l].data.data(), b.residuals[l].data.data(),
                      a.residuals[l].data.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("forward validates tokens and length") {
  ToyLm m = init_toy_lm(tiny_cfg(), 10, Rng(3));
  CHECK_THROWS_AS(forward(m, {0, 1, 10}), InputError);         // out of vocabulary
  CHECK_THROWS_AS(forward(m, std::vector<TokenId>{}), InputError);
  std::vector<TokenId> too_long(65, 0);
  CHECK_THROWS_AS(forward(m, too_long), InputError);
}

TEST_CASE("identity hook equals unhooked output exactly") {
  ToyLm m = init_toy_lm(tiny_cfg(), game_vocabulary().size(), Rng(3));
  auto toks = demo_tokens(15, m.vocab_size, Rng(2));
  ResidualHook hook;
  hook.layer = 1;
  hook.fn = [](Mat&) {};
  TokenDistribution with = next_token_distribution(m, toks, 1.0, &hook);
  TokenDistribution without = next_token_distribution(m, toks, 1.0);
  CHECK(std::memcmp(with.probs.data(), without.probs.data(),
                    with.probs.size() * sizeof(double)) == 0);
}

TEST_CASE("hook layer actually transforms downstream computation") {
  ToyLm m = init_toy_lm(tiny_cfg(), game_vocabulary().size(), Rng(3));
  auto toks = demo_tokens(15, m.vocab_size, Rng(2));
  ResidualHook hook;
  hook.layer = 1;
  hook.fn = [](Mat& r) {
    for (double& v : r.data) v += 0.5;
  };
  TokenDistribution with = next_token_distribution(m, toks, 1.0, &hook);
  TokenDistribution without = next_token_distribution(m, toks, 1.0);
  CHECK(with.probs != without.probs);
}

TEST_CASE("temperature 0 gives a one-hot argmax") {
  ToyLm m = init_toy_lm(tiny_cfg(), game_vocabulary().size(), Rng(3));
  auto toks = demo_tokens(10, m.vocab_size, Rng(4));
  TokenDistribution d = next_token_distribution(m, toks, 0.0);
  int ones = 0;
  for (double p : d.probs) {
    if (p == 1.0) ++ones;
    else CHECK(p == 0.0);
  }
  CHECK(ones == 1);
}

TEST_CASE("distributions sum to one and are non-negative") {
  ToyLm m = init_toy_lm(tiny_cfg(), game_vocabulary().size(), Rng(3));
  for (std::uint64_t s = 0; s < 5; ++s) {
    auto toks = demo_tokens(18, m.vocab_size, Rng(s));
    for (double T : {0.1, 0.5, 1.0, 4.0}) {
      TokenDistribution d = next_token_distribution(m, toks, T);
      double sum = 0.0;
      for (double p : d.probs) {
        CHECK(p >= 0.0);
        sum += p;
      }
      CHECK(std::fabs(sum - 1.0) < 1e-6);
    }
  }
}

// Softmax property: raising temperature never increases the max entry.
TEST_CASE("temperature monotonicity of the max probability") {
  std::vector<double> logits = {1.3, -0.2, 0.7, 2.9, -1.5, 0.0};
  double prev_max = 1.0;
  for (double T : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) {
    auto probs = softmax_with_temperature(logits, T);
    double mx = 0.0;
    for (double p : probs) mx = std::max(mx, p);
    CHECK(mx <= prev_max + 1e-12);
    prev_max = mx;
  }
}

TEST_CASE("cached-prefix readout is bit-identical to the full forward pass") {
  ToyLm m = init_toy_lm(tiny_cfg(), game_vocabulary().size(), Rng(3));
  auto toks = demo_tokens(22, m.vocab_size, Rng(6));
  ForwardResult fr = forward(m, toks);
  for (int boundary = 0; boundary <= m.cfg.n_layers; ++boundary) {
    std::vector<double> logits = last_logits_from_boundary(
        m, fr.residuals[static_cast<std::size_t>(boundary)], boundary);
    const double* full = fr.logits.row(fr.logits.rows - 1);
    CHECK(std::memcmp(logits.data(), full, logits.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("action readout sums green and blue") {
  TokenDistribution d;
  d.probs.assign(static_cast<std::size_t>(game_vocabulary().size()), 0.0);
  const Vocabulary& v = game_vocabulary();
  d.probs[static_cast<std::size_t>(v.id("green"))] = 0.6;
  d.probs[static_cast<std::size_t>(v.id("blue"))] = 0.3;
  d.probs[static_cast<std::size_t>(v.id("round"))] = 0.1;
  ActionReadout r = action_readout(d, v);
  CHECK(r.p_green == doctest::Approx(0.6));
  CHECK(r.p_blue == doctest::Approx(0.3));
  CHECK(r.coherence == doctest::Approx(0.9));
  CHECK(r.p_defect_renorm == doctest::Approx(0.3 / 0.9));
}
