#include <doctest.h>

#include <set>

#include "steerlab/game.hpp"
#include "steerlab/policy.hpp"

using namespace steerlab;

TEST_CASE("payoff pairs match the rules text") {
  PayoffMatrix m;
  CHECK(payoff(Action::Cooperate, Action::Cooperate, m) == MoneyPair{500, 500});
  CHECK(payoff(Action::Defect, Action::Cooperate, m) == MoneyPair{700, 0});
  CHECK(payoff(Action::Cooperate, Action::Defect, m) == MoneyPair{0, 700});
  CHECK(payoff(Action::Defect, Action::Defect, m) == MoneyPair{300, 300});
}

TEST_CASE("payoff totals take the three possible values") {
  PayoffMatrix m;
  std::set<Cents> totals;
  for (Action a : {Action::Cooperate, Action::Defect}) {
    for (Action b : {Action::Cooperate, Action::Defect}) {
      MoneyPair p = payoff(a, b, m);
      totals.insert(p.first + p.second);
    }
  }
  CHECK(totals == std::set<Cents>{600, 700, 1000});
}

TEST_CASE("payoff symmetry") {
  PayoffMatrix m;
  CHECK(m.symmetric());
  for (Action a : {Action::Cooperate, Action::Defect}) {
    for (Action b : {Action::Cooperate, Action::Defect}) {
      CHECK(payoff(a, b, m).first == payoff(b, a, m).second);
    }
  }
}

TEST_CASE("score conservation: incremental equals recomputed") {
  Rng rng(7);
  GameHistory h;
  for (int r = 0; r < 200; ++r) {
    h.append(rng.bernoulli(0.4) ? Action::Defect : Action::Cooperate,
             rng.bernoulli(0.7) ? Action::Defect : Action::Cooperate);
    CHECK(h.scores() == h.recompute_scores());
  }
}

TEST_CASE("enumerate_histories(1) base case") {
  auto hs = enumerate_histories(1);
  REQUIRE(hs.size() == 4);
  CHECK(history_id(hs[0]) == "cc");
  CHECK(history_id(hs[1]) == "cd");
  CHECK(history_id(hs[2]) == "dc");
  CHECK(history_id(hs[3]) == "dd");
}

TEST_CASE("enumerate_histories(2) order and endpoints") {
  auto hs = enumerate_histories(2);
  REQUIRE(hs.size() == 16);
  CHECK(history_id(hs.front()) == "cc.cc");
  CHECK(history_id(hs.back()) == "dd.dd");
}

TEST_CASE("enumerate_histories(3) yields 64 distinct histories") {
  auto hs = enumerate_histories(3);
  REQUIRE(hs.size() == 64);
  std::set<std::string> ids;
  for (const auto& h : hs) ids.insert(history_id(h));
  CHECK(ids.size() == 64);
}

TEST_CASE("enumerate_histories size is 4^n with no duplicates") {
  for (int n = 1; n <= 5; ++n) {
    auto hs = enumerate_histories(n);
    CHECK(hs.size() == (1u << (2 * n)));
    std::set<std::uint64_t> codes;
    for (const auto& h : hs) {
      CHECK(h.length() == n);
      codes.insert(history_index(h));
    }
    CHECK(codes.size() == hs.size());
  }
}

TEST_CASE("enumerate_histories bounds") {
  CHECK_THROWS_AS(enumerate_histories(0), InputError);
  CHECK_THROWS_AS(enumerate_histories(9), InputError);
}

TEST_CASE("history_index inverts enumeration order") {
  auto hs = enumerate_histories(3);
  for (std::size_t i = 0; i < hs.size(); ++i) {
    CHECK(history_index(hs[i]) == i);
  }
}

TEST_CASE("defection_count per player") {
  GameHistory h;
  h.append(Action::Defect, Action::Cooperate);
  h.append(Action::Cooperate, Action::Defect);
  h.append(Action::Defect, Action::Defect);
  CHECK(defection_count(h, 1) == 2);
  CHECK(defection_count(h, 2) == 2);

  GameHistory all_c;
  for (int i = 0; i < 3; ++i) all_c.append(Action::Cooperate, Action::Cooperate);
  CHECK(defection_count(all_c, 1) == 0);
}

TEST_CASE("play_game: always-defect vs always-cooperate") {
  Always d(Action::Defect);
  Always c(Action::Cooperate);
  GameHistory h = play_game(d, c, 3, Rng(1));
  REQUIRE(h.length() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(h.round(i).p1 == Action::Defect);
    CHECK(h.round(i).p2 == Action::Cooperate);
  }
  CHECK(h.score(1) == 2100);
  CHECK(h.score(2) == 0);
}

TEST_CASE("play_game is deterministic given the seed") {
  RandomDefector a(0.5);
  RandomDefector b(0.5);
  GameHistory h1 = play_game(a, b, 50, Rng(99));
  GameHistory h2 = play_game(a, b, 50, Rng(99));
  REQUIRE(h1.length() == h2.length());
  CHECK(history_id(h1) == history_id(h2));
  CHECK(h1.scores() == h2.scores());
  // A different seed should (generically) give a different trajectory.
  GameHistory h3 = play_game(a, b, 50, Rng(100));
  CHECK(history_id(h1) != history_id(h3));
}

TEST_CASE("play_game requires at least one round") {
  Always c(Action::Cooperate);
  CHECK_THROWS_AS(play_game(c, c, 0, Rng(1)), InputError);
}

TEST_CASE("action label mapping is fixed and total") {
  CHECK(std::string(token_label(Action::Cooperate)) == "green");
  CHECK(std::string(token_label(Action::Defect)) == "blue");
  CHECK(action_from_label("green") == Action::Cooperate);
  CHECK(action_from_label("blue") == Action::Defect);
  CHECK_THROWS_AS(action_from_label("purple"), InputError);
}
