#pragma once

#include <array>
#include <string_view>

namespace voi {

// The three operations the search-time controller allocates budget across.
enum class Action { Search = 0, Decompose = 1, Answer = 2 };

inline constexpr std::array<Action, 3> kAllActions{Action::Search, Action::Decompose,
                                                   Action::Answer};

inline constexpr int index_of(Action a) { return static_cast<int>(a); }

// Step-level instruction attached to an executed operation. BudgetBackstop is
// the forced-answer instruction issued when the remaining budget cannot cover
// any tool action.
enum class Instruction { Search, Decompose, Answer, BudgetBackstop };

inline constexpr std::string_view to_string(Action a) {
  switch (a) {
    case Action::Search: return "search";
    case Action::Decompose: return "decompose";
    case Action::Answer: return "answer";
  }
  return "?";
}

inline constexpr std::string_view to_string(Instruction i) {
  switch (i) {
    case Instruction::Search: return "search";
    case Instruction::Decompose: return "decompose";
    case Instruction::Answer: return "answer";
    case Instruction::BudgetBackstop: return "budget_backstop";
  }
  return "?";
}

}  // namespace voi
