#ifndef STEERLAB_CORPUS_HPP
#define STEERLAB_CORPUS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "steerlab/game.hpp"
#include "steerlab/policy.hpp"
#include "steerlab/prompt.hpp"
#include "steerlab/vocab.hpp"

namespace steerlab {

// Synthetic pretraining data with a planted cooperativeness concept: each
// transcript is a rendered game prompt whose final action comes from a
// persona-specific teacher policy, with the persona surfaced by a marker
// token (or hidden behind <anon> at the dropout rate).
struct CorpusConfig {
  int n_sequences = 3072;
  int rounds_min = 1;
  int rounds_max = 3;
  double noise = 0.1;            // teacher action flip rate
  double persona_mix = 0.5;      // fraction of cooperative-persona sequences
  double marker_dropout = 0.25;  // probability the marker renders as <anon>
  std::string dove_teacher = "always_cooperate";  // or "tit_for_tat"
  std::string hawk_teacher = "always_defect";
  int context_window = 256;
};

struct Transcript {
  std::vector<TokenId> tokens;  // prompt followed by the action token
  Persona persona;              // planted label
  bool marker_visible = true;
  Action clean_action = Action::Cooperate;  // teacher action before noise
  Action final_action = Action::Cooperate;  // action actually rendered
  GameHistory history;
};

struct TranscriptCorpus {
  CorpusConfig cfg;
  std::uint64_t seed = 0;
  std::vector<Transcript> sequences;
};

PolicyPtr make_teacher(const std::string& kind);  // throws ConfigError on unknown kind

TranscriptCorpus generate_corpus(const CorpusConfig& cfg, Rng rng);

}  // namespace steerlab

#endif  // STEERLAB_CORPUS_HPP
