#ifndef STEERLAB_VOCAB_HPP
#define STEERLAB_VOCAB_HPP

#include <string>
#include <unordered_map>
#include <vector>

#include "steerlab/errors.hpp"

namespace steerlab {

using TokenId = int;

// Closed word-level vocabulary. The id mapping is a bijection fixed at
// construction; encode of an unknown word is an error (there is no <unk>).
class Vocabulary {
 public:
  explicit Vocabulary(std::vector<std::string> tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(TokenId id) const;
  TokenId id(const std::string& token) const;  // throws InputError
  bool contains(const std::string& token) const;

  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

// The fixed game vocabulary: action words, prompt template words, digits for
// round markers, and the persona marker tokens.
const Vocabulary& game_vocabulary();

// Persona markers. <dove> tags transcripts from the cooperative teacher,
// <hawk> from the aggressive one, <anon> leaves the persona unrevealed.
inline constexpr const char* kBosToken = "<bos>";
inline constexpr const char* kDoveToken = "<dove>";
inline constexpr const char* kHawkToken = "<hawk>";
inline constexpr const char* kAnonToken = "<anon>";
inline constexpr const char* kCooperateToken = "green";
inline constexpr const char* kDefectToken = "blue";

enum class Persona { Dove, Hawk, Anon };

const char* persona_marker(Persona p);
Persona persona_from_string(const std::string& s);  // throws InputError

}  // namespace steerlab

#endif  // STEERLAB_VOCAB_HPP
