#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "voi/budget.hpp"
#include "voi/controller.hpp"
#include "voi/metrics.hpp"
#include "voi/rng.hpp"

namespace voi {

enum class QuestionType { YesNo, BinaryChoice, Factoid, Other };
enum class SlotType { Capacity, Date, YearRange, None };

inline constexpr std::string_view to_string(QuestionType t) {
  switch (t) {
    case QuestionType::YesNo: return "yes_no";
    case QuestionType::BinaryChoice: return "binary_choice";
    case QuestionType::Factoid: return "factoid";
    case QuestionType::Other: return "other";
  }
  return "?";
}

inline constexpr std::string_view to_string(SlotType t) {
  switch (t) {
    case SlotType::Capacity: return "capacity";
    case SlotType::Date: return "date";
    case SlotType::YearRange: return "year_range";
    case SlotType::None: return "none";
  }
  return "?";
}

// One retrievable evidence snippet. The object span is the answer this item
// contributes; the canonical span is the full answer-bearing phrase (it may
// extend the object span with qualifier tokens on final-hop gold items).
struct EvidenceItem {
  int id = 0;
  int hop = 0;
  bool gold = false;
  std::vector<std::string> tokens;
  int obj_first = 0;
  int obj_len = 0;
  int span_first = 0;
  int span_len = 0;

  std::vector<std::string> object() const {
    return {tokens.begin() + obj_first, tokens.begin() + obj_first + obj_len};
  }
  std::vector<std::string> canonical_span() const {
    return {tokens.begin() + span_first, tokens.begin() + span_first + span_len};
  }
};

struct Hop {
  std::string key;  // retrieval key for this hop
  EvidenceItem gold;
  std::vector<EvidenceItem> distractors;
};

// A synthetic multi-hop question. The gold answer is derivable exactly when
// every hop's gold evidence has been revealed.
struct QAInstance {
  std::string question_id;
  std::uint64_t seed = 0;
  int hop_count = 1;
  bool compositional = false;
  bool comparative = false;
  QuestionType q_type = QuestionType::Other;
  SlotType q_slot = SlotType::None;
  bool explicit_factoid_slot = false;
  std::vector<Hop> hops;
  std::vector<std::string> answer_base;       // object form extracted by the backstop
  std::vector<std::string> answer_canonical;  // completed form present in the evidence
  std::vector<std::string> gold_answer;
  double noise = 0.0;
  double decompose_boost = 0.75;
  int top_k = 5;

  const EvidenceItem* item(int id) const {
    for (const Hop& h : hops) {
      if (h.gold.id == id) return &h.gold;
      for (const EvidenceItem& d : h.distractors)
        if (d.id == id) return &d;
    }
    return nullptr;
  }
};

struct GenParams {
  int hop_count = 2;
  double distractor_rate = 0.5;  // distractors per hop, as a fraction of 2*top_k
  double noise = 0.0;            // probability a retrieval misses the gold item
  double qualifier_rate = 0.0;   // chance the answer carries a canonical qualifier
  double canonical_gold_rate = 0.5;  // given a qualifier, chance the scored gold is canonical
  double typed_slot_rate = 0.5;      // given a qualifier, chance the slot is typed
  double yes_no_rate = 0.0;
  double binary_rate = 0.0;
  double comparative_rate = 0.0;  // fraction of binary questions with comparative structure
  double decompose_boost = 0.75;
  int top_k = 5;
};

namespace detail {

inline std::string synth_token(const char* prefix, SplitMix64& g) {
  static const char* alphabet = "abcdefghjkmnpqrstuvwxyz";
  std::string t = prefix;
  for (int i = 0; i < 5; ++i) t.push_back(alphabet[g.next_int(0, 22)]);
  return t;
}

inline void validate(const GenParams& p) {
  if (p.hop_count < 1) throw std::invalid_argument("hop_count must be >= 1");
  if (p.top_k < 1) throw std::invalid_argument("top_k must be >= 1");
  for (double r : {p.distractor_rate, p.noise, p.qualifier_rate, p.canonical_gold_rate,
                   p.typed_slot_rate, p.yes_no_rate, p.binary_rate, p.comparative_rate,
                   p.decompose_boost})
    if (r < 0.0 || r > 1.0) throw std::invalid_argument("rate parameters must lie in [0,1]");
  if (p.yes_no_rate + p.binary_rate > 1.0)
    throw std::invalid_argument("question-kind rates must sum to at most 1");
}

}  // namespace detail

inline QAInstance generate_instance(std::uint64_t seed, const GenParams& p) {
  detail::validate(p);
  SplitMix64 g(hash_combine(seed, 0x51a9u));

  QAInstance inst;
  inst.question_id = "q" + std::to_string(seed);
  inst.seed = seed;
  inst.hop_count = p.hop_count;
  inst.compositional = p.hop_count >= 2;
  inst.noise = p.noise;
  inst.decompose_boost = p.decompose_boost;
  inst.top_k = p.top_k;

  // Question kind and answer forms.
  const double kind_draw = g.next_double();
  std::vector<std::string> base, canonical;
  if (kind_draw < p.yes_no_rate) {
    inst.q_type = QuestionType::YesNo;
    base = {g.next_bool(0.5) ? "yes" : "no"};
    canonical = base;
  } else if (kind_draw < p.yes_no_rate + p.binary_rate) {
    inst.q_type = QuestionType::BinaryChoice;
    inst.comparative = g.next_bool(p.comparative_rate);
    base = {detail::synth_token("opt", g)};
    canonical = base;
  } else {
    const bool qualified = g.next_bool(p.qualifier_rate);
    if (!qualified) {
      inst.q_type = QuestionType::Other;
      base = {detail::synth_token("obj", g)};
      canonical = g.next_bool(0.5)
                      ? std::vector<std::string>{base[0], detail::synth_token("qual", g)}
                      : base;
    } else if (g.next_bool(p.typed_slot_rate)) {
      inst.q_type = QuestionType::Factoid;
      const int which = static_cast<int>(g.next_int(0, 2));
      if (which == 0) {
        inst.q_slot = SlotType::Capacity;
        base = {std::to_string(g.next_int(500, 90000))};
        canonical = {base[0], "seated"};
      } else if (which == 1) {
        inst.q_slot = SlotType::Date;
        static const char* months[] = {"january", "march", "june", "september", "november"};
        base = {std::to_string(g.next_int(1850, 2020))};
        canonical = {months[g.next_int(0, 4)], base[0]};
      } else {
        inst.q_slot = SlotType::YearRange;
        const long long y = g.next_int(1850, 2000);
        base = {std::to_string(y)};
        canonical = {base[0], "to", std::to_string(y + g.next_int(1, 40))};
      }
    } else {
      inst.q_type = QuestionType::Factoid;
      inst.explicit_factoid_slot = true;
      base = {detail::synth_token("obj", g)};
      canonical = {base[0], detail::synth_token("qual", g), detail::synth_token("qual", g)};
    }
  }
  inst.answer_base = base;
  inst.answer_canonical = canonical;
  const bool canonical_scored = canonical != base && g.next_bool(p.canonical_gold_rate);
  inst.gold_answer = canonical_scored ? canonical : base;

  // Entity chain and per-hop evidence.
  std::vector<std::string> entities;
  entities.push_back(detail::synth_token("subj", g));
  for (int h = 1; h < p.hop_count; ++h) entities.push_back(detail::synth_token("ent", g));

  const int distractors_per_hop =
      std::max(1, static_cast<int>(std::lround(p.distractor_rate * 2.0 * p.top_k)));
  for (int h = 0; h < p.hop_count; ++h) {
    Hop hop;
    hop.key = "hop" + std::to_string(h) + ":" + entities[static_cast<std::size_t>(h)];

    EvidenceItem gold;
    gold.id = h * 100;
    gold.hop = h;
    gold.gold = true;
    gold.tokens = {entities[static_cast<std::size_t>(h)], detail::synth_token("rel", g)};
    if (h + 1 < p.hop_count) {
      gold.obj_first = static_cast<int>(gold.tokens.size());
      gold.tokens.push_back(entities[static_cast<std::size_t>(h + 1)]);
      gold.obj_len = 1;
      gold.span_first = gold.obj_first;
      gold.span_len = 1;
    } else {
      gold.span_first = static_cast<int>(gold.tokens.size());
      gold.span_len = static_cast<int>(canonical.size());
      for (const std::string& t : canonical) gold.tokens.push_back(t);
      // locate the base form inside the canonical span
      int offset = 0;
      for (std::size_t i = 0; i + base.size() <= canonical.size(); ++i) {
        bool match = true;
        for (std::size_t j = 0; j < base.size(); ++j)
          if (canonical[i + j] != base[j]) {
            match = false;
            break;
          }
        if (match) {
          offset = static_cast<int>(i);
          break;
        }
      }
      gold.obj_first = gold.span_first + offset;
      gold.obj_len = static_cast<int>(base.size());
    }
    hop.gold = gold;

    for (int d = 0; d < distractors_per_hop; ++d) {
      EvidenceItem item;
      item.id = h * 100 + 1 + d;
      item.hop = h;
      item.gold = false;
      item.tokens = {entities[static_cast<std::size_t>(h)], detail::synth_token("rel", g)};
      item.obj_first = static_cast<int>(item.tokens.size());
      item.tokens.push_back(detail::synth_token("junk", g));
      item.obj_len = 1;
      item.span_first = item.obj_first;
      item.span_len = 1;
      hop.distractors.push_back(std::move(item));
    }
    inst.hops.push_back(std::move(hop));
  }
  return inst;
}

// Mutable view of one episode's search progress. Reveal sets only grow and
// the query history is append-only.
struct SearchState {
  const QAInstance* instance = nullptr;
  std::vector<char> gold_revealed;  // per hop
  std::vector<char> opened;         // per hop: decompose made this hop an explicit target
  std::set<int> revealed_ids;
  std::vector<std::string> issued_queries;
  std::vector<char> retrieval_new_gold;  // per retrieval: did it reveal new gold evidence
  std::optional<std::vector<std::string>> candidate;
  int step = 0;
  int search_count = 0;
  int decompose_count = 0;

  int revealed_hops() const {
    int n = 0;
    for (char c : gold_revealed) n += c ? 1 : 0;
    return n;
  }
  bool all_gold_revealed() const { return revealed_hops() == instance->hop_count; }
  int first_unresolved_hop() const {
    for (int h = 0; h < instance->hop_count; ++h)
      if (!gold_revealed[static_cast<std::size_t>(h)]) return h;
    return instance->hop_count - 1;
  }
  std::vector<std::string> revealed_tokens() const {
    std::vector<std::string> out;
    for (int id : revealed_ids) {
      const EvidenceItem* it = instance->item(id);
      out.insert(out.end(), it->tokens.begin(), it->tokens.end());
    }
    return out;
  }
};

inline SearchState make_initial_state(const QAInstance& inst) {
  SearchState s;
  s.instance = &inst;
  s.gold_revealed.assign(static_cast<std::size_t>(inst.hop_count), 0);
  s.opened.assign(static_cast<std::size_t>(inst.hop_count), 0);
  return s;
}

namespace detail {

inline std::uint64_t state_fingerprint(const SearchState& s) {
  std::uint64_t h = hash_combine(s.instance->seed, 0xfeedu);
  h = hash_combine(h, s.issued_queries.size());
  h = hash_combine(h, s.revealed_ids.size());
  for (std::size_t i = 0; i < s.gold_revealed.size(); ++i)
    h = hash_combine(h, static_cast<std::uint64_t>(s.gold_revealed[i] ? i + 1 : 0));
  return h;
}

}  // namespace detail

// Mock retrieval. Pure in (instance, state, query): re-invoking with the same
// arguments returns the same list. The gold item for the queried hop appears
// with probability 1 - effective noise; an opened hop reduces the effective
// noise by the decompose boost. Remaining slots are distractors in a seeded
// rotation.
inline std::vector<const EvidenceItem*> retrieve(const QAInstance& inst, const SearchState& state,
                                                 const std::string& query, int top_k = 5) {
  if (top_k < 1) throw std::invalid_argument("top_k must be >= 1");
  int hop = -1;
  for (int h = 0; h < inst.hop_count; ++h)
    if (inst.hops[static_cast<std::size_t>(h)].key == query) {
      hop = h;
      break;
    }
  if (hop < 0) return {};

  const Hop& target = inst.hops[static_cast<std::size_t>(hop)];
  double eff_noise = inst.noise;
  if (state.opened[static_cast<std::size_t>(hop)]) eff_noise *= 1.0 - inst.decompose_boost;

  SplitMix64 g(hash_combine(detail::state_fingerprint(state), hash_string(inst.seed, query)));
  const bool gold_in = g.next_double() >= eff_noise;

  std::vector<const EvidenceItem*> out;
  if (gold_in) out.push_back(&target.gold);
  const std::size_t n_d = target.distractors.size();
  if (n_d > 0) {
    const std::size_t start = static_cast<std::size_t>(g.next_int(0, static_cast<std::int64_t>(n_d) - 1));
    for (std::size_t i = 0; i < n_d && out.size() < static_cast<std::size_t>(top_k); ++i)
      out.push_back(&target.distractors[(start + i) % n_d]);
  }
  return out;
}

// Best-supported answer span from the evidence revealed so far: the object of
// the deepest revealed gold item, falling back to the best-overlapping
// distractor object, falling back to the empty answer.
inline std::vector<std::string> backstop_answer(const SearchState& state) {
  const QAInstance& inst = *state.instance;
  for (int h = inst.hop_count - 1; h >= 0; --h)
    if (state.gold_revealed[static_cast<std::size_t>(h)])
      return inst.hops[static_cast<std::size_t>(h)].gold.object();

  const std::vector<std::string> pool = state.revealed_tokens();
  std::vector<std::string> best;
  long best_score = -1;
  std::string best_tiebreak;
  for (int id : state.revealed_ids) {
    const EvidenceItem* it = inst.item(id);
    const std::vector<std::string> obj = it->object();
    long score = 0;
    for (const std::string& t : obj)
      score += static_cast<long>(std::count(pool.begin(), pool.end(), t));
    std::string joined;
    for (const std::string& t : obj) joined += t + " ";
    if (score > best_score || (score == best_score && joined < best_tiebreak)) {
      best_score = score;
      best = obj;
      best_tiebreak = joined;
    }
  }
  return best;
}

struct ExecResult {
  SearchState next;
  ChargeVector realized;
  Instruction instruction = Instruction::Answer;
  std::string query;
  bool new_gold = false;
  int new_items = 0;
};

namespace detail {

inline int jittered_tokens(const QAInstance& inst, int step, int estimate) {
  SplitMix64 g(hash_combine(hash_combine(inst.seed, 0xc057u), static_cast<std::uint64_t>(step)));
  const int span = estimate / 10;
  const int tok = estimate + static_cast<int>(g.next_int(-span, span));
  return std::max(1, tok);
}

inline void apply_retrieval(SearchState& s, const std::vector<const EvidenceItem*>& items,
                            ExecResult& result) {
  for (const EvidenceItem* it : items) {
    if (s.revealed_ids.insert(it->id).second) ++result.new_items;
    if (it->gold && !s.gold_revealed[static_cast<std::size_t>(it->hop)]) {
      s.gold_revealed[static_cast<std::size_t>(it->hop)] = 1;
      result.new_gold = true;
    }
  }
  s.retrieval_new_gold.push_back(result.new_gold ? 1 : 0);
}

}  // namespace detail

// Executes one controller-selected operation. Realized tool cost equals the
// estimate exactly; realized token cost is the estimate with seeded bounded
// jitter. Answer additionally trims to the remaining token budget, mirroring
// the generator seeing the budget it has left.
inline ExecResult execute(const QAInstance& inst, const SearchState& state, Action action,
                          const Budget& b, const CostConfig& costs,
                          bool backstop_forced = false) {
  const ChargeVector est = estimate_charge(action, costs);
  if (est.tool > b.tool_remaining)
    throw std::logic_error("tool action executed without covering budget");

  ExecResult result;
  result.next = state;
  SearchState& s = result.next;
  result.realized = ChargeVector{est.tool, detail::jittered_tokens(inst, state.step, est.tok)};

  switch (action) {
    case Action::Search: {
      const int target = state.first_unresolved_hop();
      result.instruction = Instruction::Search;
      result.query = inst.hops[static_cast<std::size_t>(target)].key;
      detail::apply_retrieval(s, retrieve(inst, state, result.query, inst.top_k), result);
      s.issued_queries.push_back(result.query);
      ++s.search_count;
      break;
    }
    case Action::Decompose: {
      const int target = state.first_unresolved_hop();
      result.instruction = Instruction::Decompose;
      s.opened[static_cast<std::size_t>(target)] = 1;
      result.query = inst.hops[static_cast<std::size_t>(target)].key;
      // the opened flag applies to this retrieval as well
      detail::apply_retrieval(s, retrieve(inst, s, result.query, inst.top_k), result);
      s.issued_queries.push_back(result.query);
      ++s.decompose_count;
      break;
    }
    case Action::Answer: {
      result.instruction = backstop_forced ? Instruction::BudgetBackstop : Instruction::Answer;
      s.candidate = backstop_answer(state);
      result.realized.tok = std::min(result.realized.tok, std::max(1, b.tok_remaining));
      break;
    }
  }
  ++s.step;
  return result;
}

// Controller features, computed exactly from environment ground truth.
inline FeatureVector extract_features(const SearchState& state, const Budget& /*b*/) {
  const QAInstance& inst = *state.instance;
  FeatureVector f;

  const double hops = static_cast<double>(inst.hop_count);
  f.closure = static_cast<double>(state.revealed_hops()) / hops;
  f.unresolved_evidence = 1.0 - f.closure;
  f.compositionality =
      inst.compositional ? std::min(1.0, 0.4 + 0.25 * (hops - 1.0)) : 0.05;

  const std::vector<std::string> candidate = backstop_answer(state);
  f.has_candidate = candidate.empty() ? 0.0 : 1.0;
  if (!candidate.empty() && state.all_gold_revealed()) {
    const std::vector<std::string> pool = state.revealed_tokens();
    double covered = 0.0;
    for (const std::string& t : candidate)
      if (std::find(pool.begin(), pool.end(), t) != pool.end()) covered += 1.0;
    f.answer_support = covered / static_cast<double>(candidate.size());
  }

  int stagnant = 0;
  for (auto it = state.retrieval_new_gold.rbegin();
       it != state.retrieval_new_gold.rend() && stagnant < 3; ++it) {
    if (*it) break;
    ++stagnant;
  }
  f.stagnation = static_cast<double>(stagnant) / 3.0;

  if (!state.issued_queries.empty()) {
    std::set<std::string> distinct(state.issued_queries.begin(), state.issued_queries.end());
    f.loop_pressure = static_cast<double>(state.issued_queries.size() - distinct.size()) /
                      static_cast<double>(state.issued_queries.size());
  }

  f.early_answer_risk = f.compositionality * f.unresolved_evidence;

  if (state.retrieval_new_gold.empty()) {
    f.new_support_rate = 1.0;
  } else {
    const std::size_t window = std::min<std::size_t>(3, state.retrieval_new_gold.size());
    double hits = 0.0;
    for (std::size_t i = 0; i < window; ++i)
      hits += state.retrieval_new_gold[state.retrieval_new_gold.size() - 1 - i] ? 1.0 : 0.0;
    f.new_support_rate = hits / static_cast<double>(window);
  }

  f.search_count = state.search_count;
  f.decompose_count = state.decompose_count;
  return f;
}

// One executed operation, with the pre-execution scores kept for diagnostics.
struct StepRecord {
  int step = 0;
  Action action = Action::Answer;
  Instruction instruction = Instruction::Answer;
  std::string query;
  ChargeVector estimated;
  ChargeVector realized;
  ChargeVector overdraft;
  Budget remaining_after;
  ScoredActions scores;
  bool new_gold = false;
  int new_items = 0;
};

struct Trajectory {
  std::string question_id;
  std::vector<StepRecord> steps;
  SearchState final_state;
  std::vector<std::string> a_base;
  ChargeVector total_realized;
  ChargeVector total_overdraft;

  bool overdraft_flag() const { return total_overdraft.tool > 0 || total_overdraft.tok > 0; }
  int tool_used() const { return total_realized.tool; }
  int tok_used() const { return total_realized.tok; }
  int decompose_steps() const {
    int n = 0;
    for (const StepRecord& s : steps) n += s.action == Action::Decompose ? 1 : 0;
    return n;
  }
};

// Hard audit over a completed trajectory against the episode caps.
inline AuditVerdict audit_example(const Trajectory& traj, const Budget& caps) {
  return audit_usage(traj.tool_used(), traj.tok_used(), caps.tool_initial, caps.tok_initial);
}

}  // namespace voi
