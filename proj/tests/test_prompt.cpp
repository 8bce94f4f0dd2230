#include <doctest.h>

#include <set>

#include "steerlab/prompt.hpp"

using namespace steerlab;

TEST_CASE("vocabulary is a bijection with the action tokens present") {
  const Vocabulary& v = game_vocabulary();
  CHECK(v.contains("green"));
  CHECK(v.contains("blue"));
  CHECK(v.id("green") != v.id("blue"));
  for (TokenId id = 0; id < v.size(); ++id) {
    CHECK(v.id(v.token(id)) == id);
  }
  CHECK_THROWS_AS(v.id("not-a-token"), InputError);
}

TEST_CASE("empty history renders the preamble ending at the round-1 slot") {
  GameHistory h;
  auto toks = render_prompt(h, Persona::Anon, 256);
  const Vocabulary& v = game_vocabulary();
  REQUIRE(static_cast<int>(toks.size()) == prompt_length(0));
  CHECK(toks[0] == v.id(kBosToken));
  CHECK(toks[1] == v.id(kAnonToken));
  // ends with "round : 1 your choice :"
  const std::size_t n = toks.size();
  CHECK(toks[n - 6] == v.id("round"));
  CHECK(toks[n - 4] == v.id("1"));
  CHECK(toks[n - 3] == v.id("your"));
  CHECK(toks[n - 2] == v.id("choice"));
  CHECK(toks[n - 1] == v.id(":"));
}

TEST_CASE("persona markers render at the persona slot") {
  GameHistory h;
  CHECK(render_prompt(h, Persona::Dove, 256)[1] == game_vocabulary().id(kDoveToken));
  CHECK(render_prompt(h, Persona::Hawk, 256)[1] == game_vocabulary().id(kHawkToken));
}

TEST_CASE("three-round history renders three filled blocks, byte-identical on rerun") {
  GameHistory h;
  h.append(Action::Cooperate, Action::Defect);
  h.append(Action::Defect, Action::Defect);
  h.append(Action::Cooperate, Action::Cooperate);
  auto a = render_prompt(h, Persona::Dove, 256);
  auto b = render_prompt(h, Persona::Dove, 256);
  CHECK(a == b);
  REQUIRE(static_cast<int>(a.size()) == prompt_length(3));
  // round blocks carry the actions in seat-1 view
  const Vocabulary& v = game_vocabulary();
  int greens = 0, blues = 0;
  for (TokenId t : a) {
    if (t == v.id("green")) ++greens;
    if (t == v.id("blue")) ++blues;
  }
  // preamble mentions each action word 4 times; history adds 3 greens, 3 blues
  CHECK(greens == 4 + 3);
  CHECK(blues == 4 + 3);
}

TEST_CASE("seat 2 swaps the per-round roles") {
  GameHistory h;
  h.append(Action::Cooperate, Action::Defect);
  auto seat1 = render_prompt(h, Persona::Anon, 256, 1);
  auto seat2 = render_prompt(h, Persona::Anon, 256, 2);
  CHECK(seat1 != seat2);
  // Seat-2 view equals the seat-1 view of the mirrored history.
  GameHistory mirrored;
  mirrored.append(Action::Defect, Action::Cooperate);
  CHECK(seat2 == render_prompt(mirrored, Persona::Anon, 256, 1));
}

// Oracle: exhaustive check over all 64 three-round histories — rendered
// prompts must be pairwise distinct.
TEST_CASE("all 64 three-round prompts are distinct") {
  auto hs = enumerate_histories(3);
  std::set<std::vector<TokenId>> prompts;
  for (const auto& h : hs) prompts.insert(render_prompt(h, Persona::Anon, 256));
  CHECK(prompts.size() == 64);
}

TEST_CASE("context overflow raises an explicit length error") {
  GameHistory h;
  for (int i = 0; i < 30; ++i) h.append(Action::Cooperate, Action::Cooperate);
  CHECK_THROWS_AS(render_prompt(h, Persona::Anon, 128), InputError);
  // and the bound helper agrees
  const int max_rounds = max_history_rounds(128);
  GameHistory ok;
  for (int i = 0; i < max_rounds; ++i) ok.append(Action::Cooperate, Action::Cooperate);
  CHECK_NOTHROW(render_prompt(ok, Persona::Anon, 128));
}

TEST_CASE("prompt_length matches the rendered size for all lengths") {
  GameHistory h;
  for (int n = 0; n <= 12; ++n) {
    auto toks = render_prompt(h, Persona::Anon, 512);
    CHECK(static_cast<int>(toks.size()) == prompt_length(n));
    h.append(Action::Defect, Action::Cooperate);
  }
}
