#ifndef STEERLAB_POLICY_HPP
#define STEERLAB_POLICY_HPP

#include <memory>
#include <string>

#include "steerlab/game.hpp"
#include "steerlab/rng.hpp"

namespace steerlab {

// A policy is a pure function of (shared history, own seat, rng draw). All
// implementations are immutable values and safe to share across games.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual Action act(const GameHistory& h, int as_player, Rng& rng) const = 0;
  virtual std::string describe() const = 0;
};

using PolicyPtr = std::shared_ptr<const Policy>;

class RandomDefector : public Policy {
 public:
  explicit RandomDefector(double p_defect);
  Action act(const GameHistory& h, int as_player, Rng& rng) const override;
  std::string describe() const override;
  double p_defect() const { return p_defect_; }

 private:
  double p_defect_;
};

// Repeats its previous action after a win (opponent cooperated, payoff 5 or
// 7), switches after a loss (opponent defected, payoff 0 or 3). Plays `start`
// on round 1.
class WinStayLoseChange : public Policy {
 public:
  explicit WinStayLoseChange(Action start = Action::Cooperate) : start_(start) {}
  Action act(const GameHistory& h, int as_player, Rng& rng) const override;
  std::string describe() const override;

 private:
  Action start_;
};

class TitForTat : public Policy {
 public:
  explicit TitForTat(Action start = Action::Cooperate) : start_(start) {}
  Action act(const GameHistory& h, int as_player, Rng& rng) const override;
  std::string describe() const override;

 private:
  Action start_;
};

class Always : public Policy {
 public:
  explicit Always(Action a) : action_(a) {}
  Action act(const GameHistory&, int, Rng&) const override { return action_; }
  std::string describe() const override;

 private:
  Action action_;
};

// Flips the inner policy's action with probability `flip`; used to inject
// label noise into corpus teachers.
class NoisyPolicy : public Policy {
 public:
  NoisyPolicy(PolicyPtr inner, double flip);
  Action act(const GameHistory& h, int as_player, Rng& rng) const override;
  std::string describe() const override;

 private:
  PolicyPtr inner_;
  double flip_;
};

// Runs one game: both policies see the identical shared history each round,
// both are queried before the round is appended (simultaneous moves).
// Deterministic given the rng stream. PolicyError aborts the game; the
// message carries the partial history id.
GameHistory play_game(const Policy& p1, const Policy& p2, int n_rounds, Rng rng,
                      const PayoffMatrix& m = PayoffMatrix::standard());

struct DefectionRate {
  double rate = 0.0;
  double ci_low = 0.0;   // 95% Wilson interval
  double ci_high = 0.0;
  long total_rounds = 0;
  long defections = 0;
  long failed_games = 0;  // games aborted by policy failure, excluded from rate
};

// Fraction of Defect actions by player 1 over n_games games with per-game
// length drawn uniformly from [rounds_min, rounds_max].
DefectionRate empirical_defection_rate(const Policy& p1, const Policy& p2, int n_games,
                                       int rounds_min, int rounds_max, Rng rng,
                                       const PayoffMatrix& m = PayoffMatrix::standard());

}  // namespace steerlab

#endif  // STEERLAB_POLICY_HPP
