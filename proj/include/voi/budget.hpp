#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "voi/action.hpp"

namespace voi {

// A (tool calls, output tokens) pair: pre-execution charge estimate or
// realized post-execution cost.
struct ChargeVector {
  int tool = 0;
  int tok = 0;

  friend bool operator==(const ChargeVector&, const ChargeVector&) = default;
};

// Dual budget for one episode. The initial caps are immutable; the remaining
// coordinates only ever decrease (debit clamps at zero). Values are plain
// data, safe to copy across concurrent episodes.
struct Budget {
  int tool_remaining = 0;
  int tok_remaining = 0;
  int tool_initial = 0;
  int tok_initial = 0;

  friend bool operator==(const Budget&, const Budget&) = default;
};

inline Budget make_budget(int b_tool, int b_tok) {
  if (b_tool < 0 || b_tok < 0)
    throw std::invalid_argument("budget caps must be nonnegative");
  return Budget{b_tool, b_tok, b_tool, b_tok};
}

// Normalized remaining-budget pressure: 1 - min of the remaining fractions,
// clipped to [0,1]. A zero initial cap in either coordinate counts as fully
// tight.
inline double pressure(const Budget& b) {
  if (b.tool_initial <= 0 || b.tok_initial <= 0) return 1.0;
  const double tool_frac = static_cast<double>(b.tool_remaining) / b.tool_initial;
  const double tok_frac = static_cast<double>(b.tok_remaining) / b.tok_initial;
  return std::clamp(1.0 - std::min(tool_frac, tok_frac), 0.0, 1.0);
}

// Configured per-action output-token estimates, available before execution.
struct CostConfig {
  int search_tok_est = 80;
  int decompose_tok_est = 100;
  int answer_tok_est = 40;
};

// Search and Decompose each issue exactly one retrieval call; Answer issues
// none. Token components come from configuration.
inline ChargeVector estimate_charge(Action action, const CostConfig& cfg) {
  switch (action) {
    case Action::Search: return {1, cfg.search_tok_est};
    case Action::Decompose: return {1, cfg.decompose_tok_est};
    case Action::Answer: return {0, cfg.answer_tok_est};
  }
  return {};
}

struct DebitResult {
  Budget after;
  // Amount by which the realized cost exceeded the remaining budget. Overdraft
  // is a data condition recorded on the trajectory; whether it fails the hard
  // audit is decided at scoring time.
  ChargeVector overdraft;

  bool overdrew() const { return overdraft.tool > 0 || overdraft.tok > 0; }
};

inline DebitResult debit(const Budget& b, const ChargeVector& realized) {
  DebitResult r;
  r.after = b;
  r.after.tool_remaining = std::max(0, b.tool_remaining - realized.tool);
  r.after.tok_remaining = std::max(0, b.tok_remaining - realized.tok);
  r.overdraft.tool = std::max(0, realized.tool - b.tool_remaining);
  r.overdraft.tok = std::max(0, realized.tok - b.tok_remaining);
  return r;
}

// Iteration cap from the minimum-decrement argument: ceil((B_tool + B_tok) / zeta).
inline long long termination_bound(const Budget& b, double zeta) {
  if (!(zeta > 0.0)) throw std::invalid_argument("zeta must be positive");
  const double total = static_cast<double>(b.tool_initial) + static_cast<double>(b.tok_initial);
  return static_cast<long long>(std::ceil(total / zeta));
}

// Outcome of the hard dual-budget audit for one example.
struct AuditVerdict {
  bool feasible = false;
  int tool_used = 0;
  int tok_used = 0;
};

}  // namespace voi
