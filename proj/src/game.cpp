#include "steerlab/game.hpp"

namespace steerlab {

const char* token_label(Action a) { return a == Action::Cooperate ? "green" : "blue"; }

Action action_from_label(const std::string& label) {
  if (label == "green" || label == "cooperate") return Action::Cooperate;
  if (label == "blue" || label == "defect") return Action::Defect;
  throw InputError("unknown action label: " + label);
}

bool PayoffMatrix::symmetric() const {
  return cc.first == cc.second && dd.first == dd.second && cd.first == dc.second &&
         cd.second == dc.first;
}

MoneyPair payoff(Action a1, Action a2, const PayoffMatrix& m) {
  if (a1 == Action::Cooperate) return a2 == Action::Cooperate ? m.cc : m.cd;
  return a2 == Action::Cooperate ? m.dc : m.dd;
}

void GameHistory::append(Action p1, Action p2) {
  rounds_.push_back(Round{p1, p2});
  MoneyPair p = payoff(p1, p2, matrix_);
  score1_ += p.first;
  score2_ += p.second;
}

Cents GameHistory::score(int player) const {
  if (player != 1 && player != 2) throw InputError("player must be 1 or 2");
  return player == 1 ? score1_ : score2_;
}

MoneyPair GameHistory::recompute_scores() const {
  MoneyPair total{0, 0};
  for (const Round& r : rounds_) {
    MoneyPair p = payoff(r.p1, r.p2, matrix_);
    total.first += p.first;
    total.second += p.second;
  }
  return total;
}

Action GameHistory::action_of(int round_index, int player) const {
  if (player != 1 && player != 2) throw InputError("player must be 1 or 2");
  const Round& r = rounds_.at(static_cast<std::size_t>(round_index));
  return player == 1 ? r.p1 : r.p2;
}

int defection_count(const GameHistory& h, int player) {
  if (player != 1 && player != 2) throw InputError("player must be 1 or 2");
  int count = 0;
  for (const Round& r : h.rounds()) {
    Action a = player == 1 ? r.p1 : r.p2;
    if (a == Action::Defect) ++count;
  }
  return count;
}

std::vector<GameHistory> enumerate_histories(int n_rounds, const PayoffMatrix& m) {
  if (n_rounds < 1 || n_rounds > 8) {
    throw InputError("enumerate_histories: n_rounds must be in [1, 8]");
  }
  const std::uint64_t total = 1ULL << (2 * n_rounds);  // 4^n
  std::vector<GameHistory> out;
  out.reserve(total);
  for (std::uint64_t code = 0; code < total; ++code) {
    GameHistory h(m);
    // Earlier rounds in the most significant bits; within a round p1 is the
    // higher bit. Cooperate=0 < Defect=1 gives the lexicographic order.
    for (int r = 0; r < n_rounds; ++r) {
      int shift = 2 * (n_rounds - 1 - r);
      auto bits = (code >> shift) & 3;
      h.append(static_cast<Action>((bits >> 1) & 1), static_cast<Action>(bits & 1));
    }
    out.push_back(std::move(h));
  }
  return out;
}

std::uint64_t history_index(const GameHistory& h) {
  std::uint64_t code = 0;
  for (const Round& r : h.rounds()) {
    code = (code << 2) | (static_cast<std::uint64_t>(r.p1) << 1) |
           static_cast<std::uint64_t>(r.p2);
  }
  return code;
}

std::string history_id(const GameHistory& h) {
  std::string out;
  for (int i = 0; i < h.length(); ++i) {
    if (i) out += '.';
    out += h.round(i).p1 == Action::Cooperate ? 'c' : 'd';
    out += h.round(i).p2 == Action::Cooperate ? 'c' : 'd';
  }
  return out;
}

}  // namespace steerlab
