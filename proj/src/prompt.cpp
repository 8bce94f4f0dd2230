#include "steerlab/prompt.hpp"

namespace steerlab {

namespace {

void push_word(std::vector<TokenId>* out, const char* word) {
  out->push_back(game_vocabulary().id(word));
}

void push_number(std::vector<TokenId>* out, int n) {
  // Round markers are tokenized digit by digit.
  std::string s = std::to_string(n);
  for (char c : s) out->push_back(game_vocabulary().id(std::string(1, c)));
}

void push_payout_rule(std::vector<TokenId>* out, const char* mine, const char* theirs,
                      const char* pay_mine, const char* pay_theirs) {
  push_word(out, mine);
  push_word(out, theirs);
  push_word(out, "pays");
  push_word(out, pay_mine);
  push_word(out, pay_theirs);
  push_word(out, ".");
}

void push_round_header(std::vector<TokenId>* out, int round_number) {
  push_word(out, "round");
  push_word(out, ":");
  push_number(out, round_number);
  push_word(out, "your");
  push_word(out, "choice");
  push_word(out, ":");
}

int digits(int n) { return n >= 10 ? 2 : 1; }

}  // namespace

std::vector<TokenId> render_prompt(const GameHistory& h, Persona persona,
                                   int context_window, int seat) {
  if (seat != 1 && seat != 2) throw InputError("render_prompt: seat must be 1 or 2");
  // +1 keeps room for the action token the model is asked to produce.
  if (prompt_length(h.length()) + 1 > context_window) {
    throw InputError("render_prompt: history of " + std::to_string(h.length()) +
                     " rounds does not fit a context window of " +
                     std::to_string(context_window) + " tokens");
  }

  std::vector<TokenId> out;
  out.reserve(static_cast<std::size_t>(prompt_length(h.length())));
  push_word(&out, kBosToken);
  push_word(&out, persona_marker(persona));
  push_word(&out, "rules");
  push_word(&out, ":");
  push_payout_rule(&out, "green", "green", "$5", "$5");
  push_payout_rule(&out, "blue", "green", "$7", "$0");
  push_payout_rule(&out, "blue", "blue", "$3", "$3");
  push_payout_rule(&out, "green", "blue", "$0", "$7");
  push_word(&out, "game");
  push_word(&out, "history");
  push_word(&out, ":");

  for (int r = 0; r < h.length(); ++r) {
    Action mine = h.action_of(r, seat);
    Action theirs = h.action_of(r, seat == 1 ? 2 : 1);
    push_round_header(&out, r + 1);
    push_word(&out, token_label(mine));
    push_word(&out, "partner");
    push_word(&out, "'s");
    push_word(&out, "choice");
    push_word(&out, ":");
    push_word(&out, token_label(theirs));
  }
  push_round_header(&out, h.length() + 1);
  return out;
}

int prompt_length(int n_rounds) {
  // preamble: <bos> persona "rules :" + 4 payout rules of 6 + "game history :"
  int len = 2 + 2 + 4 * 6 + 3;
  for (int r = 1; r <= n_rounds; ++r) len += 11 + digits(r);  // full round block
  len += 5 + digits(n_rounds + 1);  // trailing "round : K your choice :"
  return len;
}

int max_history_rounds(int context_window) {
  int best = 0;
  for (int n = 0;; ++n) {
    if (prompt_length(n) + 1 > context_window) break;
    best = n;
  }
  return best;
}

}  // namespace steerlab
