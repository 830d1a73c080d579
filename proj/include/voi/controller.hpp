#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

#include "voi/action.hpp"
#include "voi/budget.hpp"

namespace voi {

// State features the search-time controller scores from. Every non-count
// field lives in [0,1].
struct FeatureVector {
  double unresolved_evidence = 0.0;  // fraction of hops whose gold evidence is still hidden
  double compositionality = 0.0;     // bridge-structure strength of the question
  double closure = 0.0;              // fraction of hops resolved
  double answer_support = 0.0;       // evidence support behind the extractable candidate
  double has_candidate = 0.0;        // 1 when a candidate answer is extractable now
  double stagnation = 0.0;           // consecutive recent retrievals with no new gold evidence
  double loop_pressure = 0.0;        // duplicate-query ratio over the issued queries
  double early_answer_risk = 0.0;    // risk of committing before the structure is resolved
  double new_support_rate = 0.0;     // recent retrieval success rate
  int search_count = 0;
  int decompose_count = 0;
};

// Fixed scoring coefficients. The ablation flags each neutralize exactly one
// stage of the pipeline; uniform_scores additionally zeroes every raw score so
// selection degrades to pure tie-break order (the anchor baseline).
struct ControllerConfig {
  double cost_penalty_scale = 0.7;
  double decomposition_bonus = 0.14;
  double early_answer_penalty = 0.18;
  double loop_penalty = 0.15;
  double epsilon = 1e-6;
  // Floor inside the action scale so zero-charge actions do not divide by
  // epsilon alone.
  double d_base = 0.1;

  double min_search_threshold = 0.5;    // compositionality at which >=1 search is enforced
  double weak_support_threshold = 0.3;  // premature-answer suppression threshold
  double factoid_threshold = 0.2;       // below this compositionality Decompose is masked
  double stagnation_threshold = 0.5;    // at or above this, repeated decomposition decays
  double decompose_decay = 0.5;

  bool no_penalty = false;  // drop the budget-dependent penalty term
  bool no_norm = false;     // use [u]_+ directly instead of value-per-cost
  bool no_struct = false;   // drop structural signals
  bool no_guards = false;   // identity guard operator (budget backstop still applies)
  bool uniform_scores = false;
};

enum GuardBit : std::uint32_t {
  kGuardPrematureAnswer = 1u << 0,
  kGuardFactoidDecompose = 1u << 1,
  kGuardRepeatDecompose = 1u << 2,
  kGuardMinSearch = 1u << 3,
  kGuardBackstop = 1u << 4,
};

inline constexpr double kMaskedScore = -std::numeric_limits<double>::infinity();

struct ActionScore {
  Action action = Action::Search;
  bool feasible = false;
  ChargeVector charge;
  double progress = 0.0;      // critic-style progress term
  double structural = 0.0;    // structural signal term
  double penalty = 0.0;       // signed budget penalty (enters utility negated)
  double utility = 0.0;       // progress + structural - penalty
  double raw_score = 0.0;     // clipped, cost-normalized score
  double guarded_score = kMaskedScore;  // executable score; -inf when masked
  std::uint32_t guards = 0;   // GuardBit annotations

  bool masked() const { return guarded_score == kMaskedScore; }
};

// Scores for all actions at one decision step. Masked actions keep their
// pre-guard terms so logs retain the full pipeline.
struct ScoredActions {
  std::array<ActionScore, 3> by_action{};

  ActionScore& at(Action a) { return by_action[static_cast<std::size_t>(index_of(a))]; }
  const ActionScore& at(Action a) const {
    return by_action[static_cast<std::size_t>(index_of(a))];
  }
};

inline double progress_signal(Action k, const FeatureVector& f) {
  switch (k) {
    case Action::Search:
      return f.unresolved_evidence * f.new_support_rate;
    case Action::Decompose:
      return f.compositionality * (1.0 - f.closure);
    case Action::Answer:
      return f.answer_support * f.closure * f.has_candidate;
  }
  return 0.0;
}

inline double structural_signal(Action k, const FeatureVector& f, const ControllerConfig& cfg) {
  if (cfg.no_struct) return 0.0;
  switch (k) {
    case Action::Search:
      return -cfg.loop_penalty * f.loop_pressure;
    case Action::Decompose:
      return cfg.decomposition_bonus * f.compositionality;
    case Action::Answer:
      return -cfg.early_answer_penalty * f.early_answer_risk;
  }
  return 0.0;
}

// Charge normalized against the initial caps: g_tool/B_tool + g_tok/B_tok.
// A zero cap with a positive charge counts as a full unit.
inline double charge_fraction(const ChargeVector& g, const Budget& b) {
  const double tool_part =
      b.tool_initial > 0 ? static_cast<double>(g.tool) / b.tool_initial : (g.tool > 0 ? 1.0 : 0.0);
  const double tok_part =
      b.tok_initial > 0 ? static_cast<double>(g.tok) / b.tok_initial : (g.tok > 0 ? 1.0 : 0.0);
  return tool_part + tok_part;
}

// Signed budget penalty. Positive for tool actions under pressure; negative
// (a commit bonus) for Answer once support exists.
inline double budget_penalty(Action k, const ChargeVector& g, const Budget& b,
                             const FeatureVector& f, const ControllerConfig& cfg) {
  if (cfg.no_penalty) return 0.0;
  const double rho = pressure(b);
  if (k == Action::Answer) return -cfg.cost_penalty_scale * rho * f.answer_support;
  return cfg.cost_penalty_scale * rho * charge_fraction(g, b);
}

inline double utility(Action k, const FeatureVector& f, const ChargeVector& g, const Budget& b,
                      const ControllerConfig& cfg) {
  return progress_signal(k, f) + structural_signal(k, f, cfg) - budget_penalty(k, g, b, f, cfg);
}

// Budget-aware action scale for the value-per-cost normalization.
inline double action_scale(const ChargeVector& g, const Budget& b, const ControllerConfig& cfg) {
  return (charge_fraction(g, b) + cfg.d_base) * (1.0 + pressure(b));
}

inline double normalized_score(double u, Action /*k*/, const ChargeVector& g, const Budget& b,
                               const ControllerConfig& cfg) {
  const double clipped = std::max(0.0, u);
  if (cfg.no_norm) return clipped;
  return clipped / (action_scale(g, b, cfg) + cfg.epsilon);
}

namespace detail {

inline void mask(ActionScore& s, GuardBit bit) {
  s.guarded_score = kMaskedScore;
  s.guards |= bit;
}

}  // namespace detail

// Deterministic guard operator. Applies, in order: premature-answer
// suppression, factoid-decomposition suppression, repeated-decomposition
// downweight, minimum-search enforcement, and the budget backstop. The
// backstop applies even when no_guards is set.
inline ScoredActions apply_guards(ScoredActions scores, const FeatureVector& f, const Budget& b,
                                  const ControllerConfig& cfg) {
  ActionScore& search = scores.at(Action::Search);
  ActionScore& decompose = scores.at(Action::Decompose);
  ActionScore& answer = scores.at(Action::Answer);

  if (!cfg.no_guards) {
    if (f.answer_support < cfg.weak_support_threshold && f.search_count == 0)
      detail::mask(answer, kGuardPrematureAnswer);
    if (f.compositionality < cfg.factoid_threshold)
      detail::mask(decompose, kGuardFactoidDecompose);
    if (f.stagnation >= cfg.stagnation_threshold && f.decompose_count > 0 &&
        !decompose.masked()) {
      decompose.guarded_score *= std::pow(cfg.decompose_decay, f.decompose_count);
      decompose.guards |= kGuardRepeatDecompose;
    }
    if (f.compositionality >= cfg.min_search_threshold && f.search_count < 1)
      detail::mask(answer, kGuardMinSearch);
  }

  const bool tool_action_available = search.feasible || decompose.feasible;
  if (!tool_action_available) {
    detail::mask(search, kGuardBackstop);
    detail::mask(decompose, kGuardBackstop);
    answer.guarded_score = answer.raw_score;
    answer.guards |= kGuardBackstop;
  }
  return scores;
}

// Full per-step scoring pipeline: utility, normalization, guards. `charges`
// holds the pre-execution estimate for each action in enum order. Tool actions
// are feasible only while the remaining budget covers their estimated charge;
// Answer is always feasible.
inline ScoredActions score_actions(const FeatureVector& f,
                                   const std::array<ChargeVector, 3>& charges, const Budget& b,
                                   const ControllerConfig& cfg) {
  ScoredActions scores;
  for (Action k : kAllActions) {
    ActionScore& s = scores.at(k);
    s.action = k;
    s.charge = charges[static_cast<std::size_t>(index_of(k))];
    s.feasible = k == Action::Answer || (s.charge.tool <= b.tool_remaining &&
                                         s.charge.tok <= b.tok_remaining);
    s.progress = progress_signal(k, f);
    s.structural = structural_signal(k, f, cfg);
    s.penalty = budget_penalty(k, s.charge, b, f, cfg);
    s.utility = s.progress + s.structural - s.penalty;
    s.raw_score = cfg.uniform_scores ? 0.0 : normalized_score(s.utility, k, s.charge, b, cfg);
    s.guarded_score = s.feasible ? s.raw_score : kMaskedScore;
  }
  return apply_guards(scores, f, b, cfg);
}

// Argmax over guarded scores with fixed tie-break order Answer > Search >
// Decompose. Throws if every action is masked; the budget backstop makes that
// state unreachable.
inline Action select_action(const ScoredActions& scores) {
  constexpr std::array<Action, 3> order{Action::Answer, Action::Search, Action::Decompose};
  bool found = false;
  Action best = Action::Answer;
  double best_score = kMaskedScore;
  for (Action k : order) {
    const ActionScore& s = scores.at(k);
    if (s.masked()) continue;
    if (!found || s.guarded_score > best_score) {
      found = true;
      best = k;
      best_score = s.guarded_score;
    }
  }
  if (!found) throw std::logic_error("controller deadlock: every action is masked");
  return best;
}

}  // namespace voi
