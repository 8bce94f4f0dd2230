#ifndef STEERLAB_GAME_HPP
#define STEERLAB_GAME_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "steerlab/errors.hpp"

namespace steerlab {

enum class Action : std::uint8_t { Cooperate = 0, Defect = 1 };

// Fixed action-token mapping: cooperation renders as "green", defection as
// "blue" everywhere (prompts, CSVs, reports).
const char* token_label(Action a);
Action action_from_label(const std::string& label);  // throws InputError

// Per-round payout in integer cents, so score accounting is exact.
using Cents = std::int64_t;
using MoneyPair = std::pair<Cents, Cents>;

struct PayoffMatrix {
  MoneyPair cc{500, 500};
  MoneyPair cd{0, 700};
  MoneyPair dc{700, 0};
  MoneyPair dd{300, 300};

  static PayoffMatrix standard() { return PayoffMatrix{}; }
  bool symmetric() const;
};

MoneyPair payoff(Action a1, Action a2, const PayoffMatrix& m);

struct Round {
  Action p1;
  Action p2;
};

// Joint action record plus running totals. Rounds are append-only; scores are
// maintained incrementally and must equal the fold of the payoff matrix.
class GameHistory {
 public:
  GameHistory() = default;
  explicit GameHistory(PayoffMatrix m) : matrix_(m) {}

  void append(Action p1, Action p2);

  int length() const { return static_cast<int>(rounds_.size()); }
  const std::vector<Round>& rounds() const { return rounds_; }
  const Round& round(int i) const { return rounds_[static_cast<std::size_t>(i)]; }
  const PayoffMatrix& matrix() const { return matrix_; }

  Cents score(int player) const;             // player in {1, 2}
  MoneyPair scores() const { return {score1_, score2_}; }
  MoneyPair recompute_scores() const;        // fold from scratch

  Action action_of(int round_index, int player) const;

 private:
  PayoffMatrix matrix_{};
  std::vector<Round> rounds_;
  Cents score1_ = 0;
  Cents score2_ = 0;
};

int defection_count(const GameHistory& h, int player);

// All joint histories of the given length, lexicographic with
// Cooperate < Defect, player 1 before player 2, earlier rounds most
// significant. n_rounds must be in [1, 8].
std::vector<GameHistory> enumerate_histories(int n_rounds,
                                             const PayoffMatrix& m = PayoffMatrix::standard());

// Canonical index of a history within enumerate_histories(h.length()).
std::uint64_t history_index(const GameHistory& h);

// Compact text form like "cc.dc.dd" (p1 then p2 per round), used in CSV keys.
std::string history_id(const GameHistory& h);

}  // namespace steerlab

#endif  // STEERLAB_GAME_HPP
