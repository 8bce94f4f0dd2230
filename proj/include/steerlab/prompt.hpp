#ifndef STEERLAB_PROMPT_HPP
#define STEERLAB_PROMPT_HPP

#include <vector>

#include "steerlab/game.hpp"
#include "steerlab/vocab.hpp"

namespace steerlab {

// Deterministic prompt renderer. Layout:
//
//   <bos> <persona> rules : green green pays $5 $5 . blue green pays $7 $0 .
//   blue blue pays $3 $3 . green blue pays $0 $7 . game history :
//   round : 1 your choice : green partner 's choice : blue
//   ...
//   round : N+1 your choice :
//
// Payout lines are ordered (your action, partner action); the sequence ends
// immediately before the next action token. `seat` selects whose view is
// rendered: seat 2 swaps the roles.
std::vector<TokenId> render_prompt(const GameHistory& h, Persona persona,
                                   int context_window, int seat = 1);

// Number of prompt tokens for a history of the given length (seat-independent).
int prompt_length(int n_rounds);

// Highest history length whose prompt (plus one action token) fits.
int max_history_rounds(int context_window);

}  // namespace steerlab

#endif  // STEERLAB_PROMPT_HPP
