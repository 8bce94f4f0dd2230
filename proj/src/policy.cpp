#include "steerlab/policy.hpp"

#include <cmath>

namespace steerlab {

RandomDefector::RandomDefector(double p_defect) : p_defect_(p_defect) {
  if (!(p_defect >= 0.0 && p_defect <= 1.0)) {
    throw InputError("RandomDefector: p_defect must be in [0, 1]");
  }
}

Action RandomDefector::act(const GameHistory&, int, Rng& rng) const {
  return rng.bernoulli(p_defect_) ? Action::Defect : Action::Cooperate;
}

std::string RandomDefector::describe() const {
  return "random_defector(p=" + std::to_string(p_defect_) + ")";
}

Action WinStayLoseChange::act(const GameHistory& h, int as_player, Rng&) const {
  if (h.length() == 0) return start_;
  const Round& last = h.round(h.length() - 1);
  Action mine = as_player == 1 ? last.p1 : last.p2;
  Action theirs = as_player == 1 ? last.p2 : last.p1;
  // Win means the opponent cooperated; both defect-defect and
  // cooperate-defect count as losses.
  if (theirs == Action::Cooperate) return mine;
  return mine == Action::Cooperate ? Action::Defect : Action::Cooperate;
}

std::string WinStayLoseChange::describe() const {
  return std::string("win_stay_lose_change(start=") + token_label(start_) + ")";
}

Action TitForTat::act(const GameHistory& h, int as_player, Rng&) const {
  if (h.length() == 0) return start_;
  const Round& last = h.round(h.length() - 1);
  return as_player == 1 ? last.p2 : last.p1;
}

std::string TitForTat::describe() const {
  return std::string("tit_for_tat(start=") + token_label(start_) + ")";
}

std::string Always::describe() const {
  return std::string("always(") + token_label(action_) + ")";
}

NoisyPolicy::NoisyPolicy(PolicyPtr inner, double flip) : inner_(std::move(inner)), flip_(flip) {
  if (!inner_) throw InputError("NoisyPolicy: missing inner policy");
  if (!(flip_ >= 0.0 && flip_ <= 1.0)) throw InputError("NoisyPolicy: flip must be in [0, 1]");
}

Action NoisyPolicy::act(const GameHistory& h, int as_player, Rng& rng) const {
  Action a = inner_->act(h, as_player, rng);
  if (rng.bernoulli(flip_)) {
    return a == Action::Cooperate ? Action::Defect : Action::Cooperate;
  }
  return a;
}

std::string NoisyPolicy::describe() const {
  return "noisy(" + inner_->describe() + ", flip=" + std::to_string(flip_) + ")";
}

GameHistory play_game(const Policy& p1, const Policy& p2, int n_rounds, Rng rng,
                      const PayoffMatrix& m) {
  if (n_rounds < 1) throw InputError("play_game: n_rounds must be >= 1");
  GameHistory h(m);
  Rng rng1 = rng.derive(1);
  Rng rng2 = rng.derive(2);
  for (int r = 0; r < n_rounds; ++r) {
    Action a1, a2;
    try {
      a1 = p1.act(h, 1, rng1);
      a2 = p2.act(h, 2, rng2);
    } catch (const PolicyError& e) {
      throw PolicyError(std::string(e.what()) + " [game aborted after " +
                        std::to_string(h.length()) + " rounds, history=" + history_id(h) + "]");
    }
    h.append(a1, a2);
  }
  return h;
}

namespace {

// Wilson score interval, z for 95%.
void wilson_interval(long k, long n, double* lo, double* hi) {
  if (n == 0) {
    *lo = 0.0;
    *hi = 1.0;
    return;
  }
  const double z = 1.959963984540054;
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = p + z2 / (2.0 * nn);
  const double spread = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
  *lo = std::max(0.0, (center - spread) / denom);
  *hi = std::min(1.0, (center + spread) / denom);
}

}  // namespace

DefectionRate empirical_defection_rate(const Policy& p1, const Policy& p2, int n_games,
                                       int rounds_min, int rounds_max, Rng rng,
                                       const PayoffMatrix& m) {
  if (n_games < 1) throw InputError("empirical_defection_rate: n_games must be >= 1");
  if (rounds_min < 1 || rounds_max < rounds_min) {
    throw InputError("empirical_defection_rate: invalid rounds range");
  }
  DefectionRate out;
  for (int g = 0; g < n_games; ++g) {
    Rng game_rng = rng.derive(static_cast<std::uint64_t>(g));
    int rounds = rounds_min == rounds_max
                     ? rounds_min
                     : game_rng.uniform_int(rounds_min, rounds_max);
    try {
      GameHistory h = play_game(p1, p2, rounds, game_rng.derive(0x67616d65ULL), m);
      out.total_rounds += h.length();
      out.defections += defection_count(h, 1);
    } catch (const PolicyError&) {
      ++out.failed_games;
    }
  }
  out.rate = out.total_rounds > 0
                 ? static_cast<double>(out.defections) / static_cast<double>(out.total_rounds)
                 : 0.0;
  wilson_interval(out.defections, out.total_rounds, &out.ci_low, &out.ci_high);
  return out;
}

}  // namespace steerlab
