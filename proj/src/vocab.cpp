#include "steerlab/vocab.hpp"

namespace steerlab {

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  ids_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    auto [it, inserted] = ids_.emplace(tokens_[i], static_cast<TokenId>(i));
    if (!inserted) throw InputError("duplicate vocabulary token: " + tokens_[i]);
  }
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || id >= size()) throw InputError("token id out of range: " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

TokenId Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  if (it == ids_.end()) throw InputError("token not in vocabulary: " + token);
  return it->second;
}

bool Vocabulary::contains(const std::string& token) const {
  return ids_.find(token) != ids_.end();
}

const Vocabulary& game_vocabulary() {
  static const Vocabulary vocab([] {
    std::vector<std::string> t = {
        kBosToken, kDoveToken, kHawkToken, kAnonToken,
        // prompt template words
        "rules", "pays", "game", "history", "round", "your", "choice", "partner", "'s",
        // action words
        "green", "blue",
        // payout amounts (dollars, matching the rules text)
        "$0", "$3", "$5", "$7",
        // punctuation
        ":", ".",
    };
    for (char d = '0'; d <= '9'; ++d) t.emplace_back(1, d);
    return t;
  }());
  return vocab;
}

const char* persona_marker(Persona p) {
  switch (p) {
    case Persona::Dove: return kDoveToken;
    case Persona::Hawk: return kHawkToken;
    case Persona::Anon: return kAnonToken;
  }
  return kAnonToken;
}

Persona persona_from_string(const std::string& s) {
  if (s == "dove" || s == kDoveToken) return Persona::Dove;
  if (s == "hawk" || s == kHawkToken) return Persona::Hawk;
  if (s == "anon" || s == kAnonToken) return Persona::Anon;
  throw InputError("unknown persona: " + s);
}

}  // namespace steerlab
