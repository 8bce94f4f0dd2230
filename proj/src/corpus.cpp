#include "steerlab/corpus.hpp"

namespace steerlab {

PolicyPtr make_teacher(const std::string& kind) {
  if (kind == "always_cooperate") return std::make_shared<Always>(Action::Cooperate);
  if (kind == "always_defect") return std::make_shared<Always>(Action::Defect);
  if (kind == "tit_for_tat") return std::make_shared<TitForTat>(Action::Cooperate);
  if (kind == "wsls") return std::make_shared<WinStayLoseChange>(Action::Cooperate);
  throw ConfigError("unknown teacher policy: " + kind);
}

TranscriptCorpus generate_corpus(const CorpusConfig& cfg, Rng rng) {
  if (cfg.n_sequences < 1) throw ConfigError("corpus: n_sequences must be >= 1");
  if (cfg.rounds_min < 0 || cfg.rounds_max < cfg.rounds_min) {
    throw ConfigError("corpus: invalid rounds range");
  }
  if (!(cfg.persona_mix >= 0.0 && cfg.persona_mix <= 1.0)) {
    throw ConfigError("corpus: persona_mix must be in [0, 1]");
  }
  if (!(cfg.noise >= 0.0 && cfg.noise <= 1.0)) {
    throw ConfigError("corpus: noise must be in [0, 1]");
  }
  PolicyPtr dove = make_teacher(cfg.dove_teacher);
  PolicyPtr hawk = make_teacher(cfg.hawk_teacher);

  TranscriptCorpus corpus;
  corpus.cfg = cfg;
  corpus.seed = rng.state();
  corpus.sequences.reserve(static_cast<std::size_t>(cfg.n_sequences));
  const Vocabulary& vocab = game_vocabulary();

  for (int i = 0; i < cfg.n_sequences; ++i) {
    Rng seq_rng = rng.derive(static_cast<std::uint64_t>(i));
    Transcript t;
    t.persona = seq_rng.bernoulli(cfg.persona_mix) ? Persona::Dove : Persona::Hawk;
    const Policy& teacher = t.persona == Persona::Dove ? *dove : *hawk;
    const int rounds = cfg.rounds_min == cfg.rounds_max
                           ? cfg.rounds_min
                           : seq_rng.uniform_int(cfg.rounds_min, cfg.rounds_max);
    RandomDefector opponent(seq_rng.uniform());

    for (int r = 0; r < rounds; ++r) {
      Action a1 = teacher.act(t.history, 1, seq_rng);
      if (seq_rng.bernoulli(cfg.noise)) {
        a1 = a1 == Action::Cooperate ? Action::Defect : Action::Cooperate;
      }
      Action a2 = opponent.act(t.history, 2, seq_rng);
      t.history.append(a1, a2);
    }
    t.clean_action = teacher.act(t.history, 1, seq_rng);
    t.final_action = t.clean_action;
    if (seq_rng.bernoulli(cfg.noise)) {
      t.final_action =
          t.final_action == Action::Cooperate ? Action::Defect : Action::Cooperate;
    }
    t.marker_visible = !seq_rng.bernoulli(cfg.marker_dropout);
    Persona marker = t.marker_visible ? t.persona : Persona::Anon;
    t.tokens = render_prompt(t.history, marker, cfg.context_window);
    t.tokens.push_back(vocab.id(token_label(t.final_action)));
    corpus.sequences.push_back(std::move(t));
  }
  return corpus;
}

}  // namespace steerlab
