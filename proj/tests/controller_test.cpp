#include "voi/controller.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "voi/rng.hpp"

namespace voi {
namespace {

std::array<ChargeVector, 3> default_charges() {
  const CostConfig costs;
  return {estimate_charge(Action::Search, costs), estimate_charge(Action::Decompose, costs),
          estimate_charge(Action::Answer, costs)};
}

FeatureVector random_features(SplitMix64& g) {
  FeatureVector f;
  f.unresolved_evidence = g.next_double();
  f.compositionality = g.next_double();
  f.closure = g.next_double();
  f.answer_support = g.next_double();
  f.has_candidate = g.next_bool(0.5) ? 1.0 : 0.0;
  f.stagnation = g.next_double();
  f.loop_pressure = g.next_double();
  f.early_answer_risk = g.next_double();
  f.new_support_rate = g.next_double();
  f.search_count = static_cast<int>(g.next_int(0, 4));
  f.decompose_count = static_cast<int>(g.next_int(0, 3));
  return f;
}

Budget random_budget(SplitMix64& g) {
  Budget b = make_budget(static_cast<int>(g.next_int(1, 4)), static_cast<int>(g.next_int(40, 600)));
  b.tool_remaining = static_cast<int>(g.next_int(0, b.tool_initial));
  b.tok_remaining = static_cast<int>(g.next_int(0, b.tok_initial));
  return b;
}

TEST(ProgressSignalTest, AnswerWithoutCandidateIsZero) {
  FeatureVector f;
  f.answer_support = 0.9;
  f.closure = 1.0;
  f.has_candidate = 0.0;
  EXPECT_DOUBLE_EQ(progress_signal(Action::Answer, f), 0.0);
}

TEST(ProgressSignalTest, SearchWithNothingUnresolvedIsZero) {
  FeatureVector f;
  f.unresolved_evidence = 0.0;
  f.new_support_rate = 1.0;
  EXPECT_DOUBLE_EQ(progress_signal(Action::Search, f), 0.0);
}

TEST(ProgressSignalTest, DecomposeBeatsStarvedSearch) {
  FeatureVector f;
  f.compositionality = 0.9;
  f.closure = 0.1;
  f.unresolved_evidence = 1.0;
  f.new_support_rate = 0.1;
  const double dec = progress_signal(Action::Decompose, f);
  const double search = progress_signal(Action::Search, f);
  EXPECT_DOUBLE_EQ(dec, 0.9 * 0.9);
  EXPECT_GT(dec, 0.0);
  EXPECT_GT(dec, search);
}

TEST(StructuralSignalTest, DecompositionBonus) {
  ControllerConfig cfg;
  FeatureVector f;
  f.compositionality = 1.0;
  EXPECT_DOUBLE_EQ(structural_signal(Action::Decompose, f, cfg), 0.14);
}

TEST(StructuralSignalTest, EarlyAnswerPenalty) {
  ControllerConfig cfg;
  FeatureVector f;
  f.early_answer_risk = 1.0;
  EXPECT_DOUBLE_EQ(structural_signal(Action::Answer, f, cfg), -0.18);
}

TEST(StructuralSignalTest, AllZeroFeaturesGiveZero) {
  ControllerConfig cfg;
  FeatureVector f;
  for (Action k : kAllActions) EXPECT_DOUBLE_EQ(structural_signal(k, f, cfg), 0.0);
}

TEST(StructuralSignalTest, NoStructAblationZeroes) {
  ControllerConfig cfg;
  cfg.no_struct = true;
  FeatureVector f;
  f.compositionality = 1.0;
  f.early_answer_risk = 1.0;
  f.loop_pressure = 1.0;
  for (Action k : kAllActions) EXPECT_DOUBLE_EQ(structural_signal(k, f, cfg), 0.0);
}

TEST(BudgetPenaltyTest, ZeroAtFullBudget) {
  ControllerConfig cfg;
  FeatureVector f;
  EXPECT_DOUBLE_EQ(budget_penalty(Action::Search, {1, 80}, make_budget(2, 200), f, cfg), 0.0);
}

TEST(BudgetPenaltyTest, SearchUnderHalfPressure) {
  ControllerConfig cfg;
  FeatureVector f;
  Budget b = make_budget(2, 200);
  b.tool_remaining = 1;
  b.tok_remaining = 100;
  // 0.7 * 0.5 * (1/2 + 80/200)
  EXPECT_NEAR(budget_penalty(Action::Search, {1, 80}, b, f, cfg), 0.315, 1e-12);
}

TEST(BudgetPenaltyTest, AnswerBonusAtExhaustion) {
  ControllerConfig cfg;
  FeatureVector f;
  f.answer_support = 1.0;
  Budget b = make_budget(2, 200);
  b.tool_remaining = 0;
  b.tok_remaining = 0;
  EXPECT_NEAR(budget_penalty(Action::Answer, {0, 40}, b, f, cfg), -0.7, 1e-12);
}

TEST(BudgetPenaltyTest, SignInvariant) {
  ControllerConfig cfg;
  SplitMix64 g(41);
  for (int i = 0; i < 500; ++i) {
    const FeatureVector f = random_features(g);
    const Budget b = random_budget(g);
    const double rho = pressure(b);
    for (Action k : {Action::Search, Action::Decompose}) {
      const ChargeVector charge{1, static_cast<int>(g.next_int(1, 120))};
      const double pi = budget_penalty(k, charge, b, f, cfg);
      if (rho > 0.0) EXPECT_GT(pi, 0.0);
    }
    EXPECT_LE(budget_penalty(Action::Answer, {0, 40}, b, f, cfg), 0.0);
  }
}

TEST(UtilityTest, AdditiveComposition) {
  ControllerConfig cfg;
  FeatureVector f;
  EXPECT_DOUBLE_EQ(utility(Action::Search, f, {1, 80}, make_budget(2, 200), cfg), 0.0);

  // progress 0.5, structural 0.14, penalty 0.315 under half pressure.
  f.compositionality = 1.0;
  f.closure = 0.5;
  Budget b = make_budget(2, 200);
  b.tool_remaining = 1;
  b.tok_remaining = 100;
  EXPECT_NEAR(utility(Action::Decompose, f, {1, 100}, b, cfg),
              0.5 + 0.14 - 0.7 * 0.5 * (0.5 + 0.5), 1e-12);
}

TEST(UtilityTest, NoPenaltyAblation) {
  ControllerConfig cfg;
  cfg.no_penalty = true;
  FeatureVector f;
  f.compositionality = 1.0;
  f.closure = 0.5;
  Budget b = make_budget(2, 200);
  b.tool_remaining = 1;
  b.tok_remaining = 100;
  EXPECT_NEAR(utility(Action::Decompose, f, {1, 100}, b, cfg), 0.64, 1e-12);
}

TEST(NormalizedScoreTest, NegativeUtilityClipsToZero) {
  ControllerConfig cfg;
  EXPECT_DOUBLE_EQ(normalized_score(-0.3, Action::Search, {1, 80}, make_budget(2, 200), cfg), 0.0);
  cfg.no_norm = true;
  EXPECT_DOUBLE_EQ(normalized_score(-0.3, Action::Search, {1, 80}, make_budget(2, 200), cfg), 0.0);
}

TEST(NormalizedScoreTest, UnitScale) {
  ControllerConfig cfg;
  // scale = (1/2 + 60/200 + 0.1) * (1 + 0) = 0.9 at full budget.
  const Budget b = make_budget(2, 200);
  EXPECT_NEAR(normalized_score(0.9, Action::Search, {1, 60}, b, cfg), 1.0, 1e-5);
}

TEST(NormalizedScoreTest, HalvedScaleDoublesScore) {
  ControllerConfig cfg;
  const Budget b = make_budget(2, 200);
  // scales 0.9 and 0.45 at zero pressure.
  const double lo = normalized_score(0.9, Action::Search, {1, 60}, b, cfg);
  const double hi = normalized_score(0.9, Action::Answer, {0, 70}, b, cfg);
  EXPECT_NEAR(hi / lo, 2.0, 1e-4);
}

TEST(NormalizedScoreTest, NoNormReturnsClippedUtility) {
  ControllerConfig cfg;
  cfg.no_norm = true;
  EXPECT_DOUBLE_EQ(normalized_score(0.37, Action::Search, {1, 80}, make_budget(1, 100), cfg),
                   0.37);
}

TEST(GuardTest, MinimumSearchMasksAnswerOnCompositionalCases) {
  ControllerConfig cfg;
  FeatureVector f;
  f.compositionality = 0.9;
  f.answer_support = 0.8;  // strong support, so only the minimum-search rule fires
  f.search_count = 0;
  const ScoredActions s = score_actions(f, default_charges(), make_budget(3, 500), cfg);
  EXPECT_TRUE(s.at(Action::Answer).masked());
  EXPECT_TRUE(s.at(Action::Answer).guards & kGuardMinSearch);
  EXPECT_FALSE(s.at(Action::Search).masked());
}

TEST(GuardTest, PrematureAnswerMaskedUnderWeakSupport) {
  ControllerConfig cfg;
  FeatureVector f;
  f.compositionality = 0.05;  // factoid: the minimum-search rule stays inactive
  f.answer_support = 0.1;
  f.search_count = 0;
  const ScoredActions s = score_actions(f, default_charges(), make_budget(3, 500), cfg);
  EXPECT_TRUE(s.at(Action::Answer).masked());
  EXPECT_TRUE(s.at(Action::Answer).guards & kGuardPrematureAnswer);
}

TEST(GuardTest, FactoidMasksDecompose) {
  ControllerConfig cfg;
  FeatureVector f;
  f.compositionality = 0.05;
  f.search_count = 1;
  const ScoredActions s = score_actions(f, default_charges(), make_budget(3, 500), cfg);
  EXPECT_TRUE(s.at(Action::Decompose).masked());
  EXPECT_TRUE(s.at(Action::Decompose).guards & kGuardFactoidDecompose);
}

TEST(GuardTest, RepeatedDecomposeDecaysUnderStagnation) {
  ControllerConfig cfg;
  FeatureVector f;
  f.compositionality = 0.9;
  f.closure = 0.0;
  f.stagnation = 1.0;
  f.decompose_count = 2;
  f.search_count = 1;
  const ScoredActions s = score_actions(f, default_charges(), make_budget(3, 500), cfg);
  const ActionScore& d = s.at(Action::Decompose);
  EXPECT_FALSE(d.masked());
  EXPECT_TRUE(d.guards & kGuardRepeatDecompose);
  EXPECT_NEAR(d.guarded_score, d.raw_score * 0.25, 1e-12);
}

TEST(GuardTest, BackstopForcesAnswerWhenToolsUncovered) {
  ControllerConfig cfg;
  FeatureVector f;
  f.compositionality = 0.9;  // would otherwise mask Answer via minimum search
  f.search_count = 0;
  Budget b = make_budget(2, 200);
  b.tool_remaining = 0;
  b.tok_remaining = 10;
  const ScoredActions s = score_actions(f, default_charges(), b, cfg);
  EXPECT_TRUE(s.at(Action::Search).masked());
  EXPECT_TRUE(s.at(Action::Decompose).masked());
  EXPECT_FALSE(s.at(Action::Answer).masked());
  EXPECT_TRUE(s.at(Action::Answer).guards & kGuardBackstop);
  EXPECT_EQ(select_action(s), Action::Answer);
}

TEST(GuardTest, BackstopAppliesEvenWithoutGuards) {
  ControllerConfig cfg;
  cfg.no_guards = true;
  FeatureVector f;
  Budget b = make_budget(1, 100);
  b.tool_remaining = 0;
  const ScoredActions s = score_actions(f, default_charges(), b, cfg);
  EXPECT_TRUE(s.at(Action::Search).masked());
  EXPECT_EQ(select_action(s), Action::Answer);
}

TEST(GuardTest, NoGuardsIsIdentityAwayFromBackstop) {
  ControllerConfig cfg;
  cfg.no_guards = true;
  SplitMix64 g(7);
  for (int i = 0; i < 300; ++i) {
    const FeatureVector f = random_features(g);
    Budget b = random_budget(g);
    b.tool_remaining = std::max(b.tool_remaining, 1);
    b.tok_remaining = std::max(b.tok_remaining, 101);  // covers every estimate
    const ScoredActions s = score_actions(f, default_charges(), b, cfg);
    for (Action k : kAllActions) {
      EXPECT_EQ(s.at(k).guards, 0u);
      EXPECT_DOUBLE_EQ(s.at(k).guarded_score, s.at(k).raw_score);
    }
  }
}

TEST(GuardTest, MaskedActionNeverOutranksUnmasked) {
  ControllerConfig cfg;
  SplitMix64 g(11);
  for (int i = 0; i < 500; ++i) {
    const FeatureVector f = random_features(g);
    const Budget b = random_budget(g);
    const ScoredActions s = score_actions(f, default_charges(), b, cfg);
    const Action chosen = select_action(s);
    EXPECT_FALSE(s.at(chosen).masked());
  }
}

TEST(ScorePipelineTest, RawScoresAreNonnegative) {
  ControllerConfig cfg;
  SplitMix64 g(13);
  for (int i = 0; i < 500; ++i) {
    const FeatureVector f = random_features(g);
    const Budget b = random_budget(g);
    const ScoredActions s = score_actions(f, default_charges(), b, cfg);
    for (Action k : kAllActions) EXPECT_GE(s.at(k).raw_score, 0.0);
  }
}

TEST(ScorePipelineTest, Deterministic) {
  ControllerConfig cfg;
  SplitMix64 g(17);
  const FeatureVector f = random_features(g);
  const Budget b = random_budget(g);
  const ScoredActions a = score_actions(f, default_charges(), b, cfg);
  const ScoredActions bis = score_actions(f, default_charges(), b, cfg);
  for (Action k : kAllActions) {
    EXPECT_EQ(a.at(k).guarded_score, bis.at(k).guarded_score);
    EXPECT_EQ(a.at(k).raw_score, bis.at(k).raw_score);
    EXPECT_EQ(a.at(k).utility, bis.at(k).utility);
  }
}

TEST(ScorePipelineTest, AblationFlagsAreSeparable) {
  const ControllerConfig base;
  SplitMix64 g(19);
  for (int i = 0; i < 200; ++i) {
    const FeatureVector f = random_features(g);
    Budget b = random_budget(g);
    b.tool_remaining = std::max(b.tool_remaining, 1);
    b.tok_remaining = std::max(b.tok_remaining, 101);
    const ScoredActions full = score_actions(f, default_charges(), b, base);

    ControllerConfig c1 = base;
    c1.no_penalty = true;
    const ScoredActions p = score_actions(f, default_charges(), b, c1);
    ControllerConfig c2 = base;
    c2.no_norm = true;
    const ScoredActions n = score_actions(f, default_charges(), b, c2);
    ControllerConfig c3 = base;
    c3.no_struct = true;
    const ScoredActions st = score_actions(f, default_charges(), b, c3);
    ControllerConfig c4 = base;
    c4.no_guards = true;
    const ScoredActions gu = score_actions(f, default_charges(), b, c4);

    for (Action k : kAllActions) {
      // no_penalty: progress and structural untouched, penalty zeroed.
      EXPECT_EQ(p.at(k).progress, full.at(k).progress);
      EXPECT_EQ(p.at(k).structural, full.at(k).structural);
      EXPECT_EQ(p.at(k).penalty, 0.0);
      // no_norm: utility identical, raw score is the clipped utility.
      EXPECT_EQ(n.at(k).utility, full.at(k).utility);
      EXPECT_EQ(n.at(k).raw_score, std::max(0.0, full.at(k).utility));
      // no_struct: structural zeroed, the others untouched.
      EXPECT_EQ(st.at(k).progress, full.at(k).progress);
      EXPECT_EQ(st.at(k).penalty, full.at(k).penalty);
      EXPECT_EQ(st.at(k).structural, 0.0);
      // no_guards: raw pipeline identical, executable score equals raw.
      EXPECT_EQ(gu.at(k).raw_score, full.at(k).raw_score);
      EXPECT_DOUBLE_EQ(gu.at(k).guarded_score, gu.at(k).raw_score);
    }
  }
}

TEST(SelectActionTest, FreshCompositionalStatePrefersSearch) {
  ControllerConfig cfg;
  FeatureVector f;
  f.unresolved_evidence = 1.0;
  f.new_support_rate = 1.0;
  f.compositionality = 0.65;
  f.closure = 0.0;
  f.early_answer_risk = 0.65;
  const Budget b = make_budget(3, 500);
  const ScoredActions s = score_actions(f, default_charges(), b, cfg);

  // Cross-check the pipeline by hand: r = [u]_+ / ((fraction + 0.1) * (1 + rho)).
  const double u_search = 1.0;
  const double d_search = (1.0 / 3.0 + 80.0 / 500.0 + 0.1) * 1.0;
  EXPECT_NEAR(s.at(Action::Search).guarded_score, u_search / (d_search + cfg.epsilon), 1e-9);
  const double u_dec = 0.65 + 0.14 * 0.65;
  const double d_dec = (1.0 / 3.0 + 100.0 / 500.0 + 0.1) * 1.0;
  EXPECT_NEAR(s.at(Action::Decompose).guarded_score, u_dec / (d_dec + cfg.epsilon), 1e-9);

  EXPECT_TRUE(s.at(Action::Answer).masked());
  EXPECT_EQ(select_action(s), Action::Search);
}

TEST(SelectActionTest, ExactTieBreaksSearchOverDecompose) {
  ControllerConfig cfg;
  cfg.decomposition_bonus = 0.0;
  CostConfig costs;
  costs.decompose_tok_est = costs.search_tok_est;  // identical charges, identical scale
  const std::array<ChargeVector, 3> charges{estimate_charge(Action::Search, costs),
                                            estimate_charge(Action::Decompose, costs),
                                            estimate_charge(Action::Answer, costs)};
  FeatureVector f;
  f.unresolved_evidence = 1.0;
  f.new_support_rate = 1.0;
  f.compositionality = 1.0;
  f.closure = 0.0;
  f.search_count = 0;
  const ScoredActions s = score_actions(f, charges, make_budget(3, 500), cfg);
  ASSERT_EQ(s.at(Action::Search).guarded_score, s.at(Action::Decompose).guarded_score);
  EXPECT_EQ(select_action(s), Action::Search);
}

TEST(SelectActionTest, AnswerWinsFullTie) {
  ControllerConfig cfg;
  cfg.no_guards = true;
  FeatureVector f;  // all-zero features: every raw score is 0
  const ScoredActions s = score_actions(f, default_charges(), make_budget(3, 500), cfg);
  EXPECT_EQ(select_action(s), Action::Answer);
}

TEST(SelectActionTest, UniformScoresReduceToTieBreak) {
  ControllerConfig cfg;
  cfg.uniform_scores = true;
  SplitMix64 g(23);
  for (int i = 0; i < 100; ++i) {
    FeatureVector f = random_features(g);
    f.search_count = 1;  // keep the premature-answer and minimum-search rules out
    f.compositionality = std::max(f.compositionality, 0.3);
    const ScoredActions s = score_actions(f, default_charges(), make_budget(3, 500), cfg);
    EXPECT_EQ(select_action(s), Action::Answer);
  }
}

}  // namespace
}  // namespace voi
