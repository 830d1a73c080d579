#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "voi/budget.hpp"
#include "voi/rng.hpp"

namespace voi {

// Conventional QA normalization: lowercase, strip punctuation, drop articles,
// whitespace-split.
inline std::vector<std::string> normalize_answer(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  for (const std::string& raw : tokens) {
    std::string cleaned;
    for (char c : raw) {
      if (std::isalnum(static_cast<unsigned char>(c)))
        cleaned.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      else if (std::isspace(static_cast<unsigned char>(c)) && !cleaned.empty() &&
               cleaned.back() != ' ')
        cleaned.push_back(' ');
    }
    // a token may expand to several after punctuation stripping
    std::string piece;
    for (char c : cleaned + " ") {
      if (c == ' ') {
        if (!piece.empty() && piece != "a" && piece != "an" && piece != "the")
          out.push_back(piece);
        piece.clear();
      } else {
        piece.push_back(c);
      }
    }
  }
  return out;
}

inline int em(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  return normalize_answer(pred) == normalize_answer(gold) ? 1 : 0;
}

// Token-level F1 over normalized answers. Empty vs empty scores 1; empty vs
// nonempty scores 0.
inline double f1(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  const std::vector<std::string> p = normalize_answer(pred);
  const std::vector<std::string> g = normalize_answer(gold);
  if (p.empty() && g.empty()) return 1.0;
  if (p.empty() || g.empty()) return 0.0;
  std::map<std::string, int> counts;
  for (const std::string& t : g) ++counts[t];
  int overlap = 0;
  for (const std::string& t : p) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  const double precision = static_cast<double>(overlap) / static_cast<double>(p.size());
  const double recall = static_cast<double>(overlap) / static_cast<double>(g.size());
  return 2.0 * precision * recall / (precision + recall);
}

// Hard dual-budget audit. Caps are inclusive: usage exactly at the cap is
// feasible.
inline AuditVerdict audit_usage(int tool_used, int tok_used, int cap_tool, int cap_tok) {
  return AuditVerdict{tool_used <= cap_tool && tok_used <= cap_tok, tool_used, tok_used};
}

// Per-example record inside one evaluation cell.
struct ExampleRecord {
  std::string id;
  double em = 0.0;
  double f1 = 0.0;
  int tool_used = 0;
  int tok_used = 0;
  bool feasible = false;
};

// One (benchmark, budget level, variant) evaluation unit under the hard audit.
// Scored aggregates zero-fill infeasible examples; usage averages are reported
// over the feasible subset.
struct CellResult {
  std::string benchmark;
  int budget_tool = 0;
  int budget_tok = 0;
  std::string variant;
  std::vector<ExampleRecord> examples;

  double mean_em() const {
    if (examples.empty()) return 0.0;
    double s = 0.0;
    for (const auto& e : examples) s += e.feasible ? e.em : 0.0;
    return s / static_cast<double>(examples.size());
  }
  double mean_f1() const {
    if (examples.empty()) return 0.0;
    double s = 0.0;
    for (const auto& e : examples) s += e.feasible ? e.f1 : 0.0;
    return s / static_cast<double>(examples.size());
  }
  double feasible_rate() const {
    if (examples.empty()) return 0.0;
    double n = 0.0;
    for (const auto& e : examples) n += e.feasible ? 1.0 : 0.0;
    return n / static_cast<double>(examples.size());
  }
  double avg_tools_feasible() const {
    double n = 0.0, s = 0.0;
    for (const auto& e : examples)
      if (e.feasible) {
        n += 1.0;
        s += e.tool_used;
      }
    return n > 0.0 ? s / n : 0.0;
  }
  double avg_tok_feasible() const {
    double n = 0.0, s = 0.0;
    for (const auto& e : examples)
      if (e.feasible) {
        n += 1.0;
        s += e.tok_used;
      }
    return n > 0.0 ? s / n : 0.0;
  }
};

// Percentile bootstrap over cell-level deltas, deterministic in the seed.
// Quantiles are taken without interpolation, so interval endpoints are always
// realizable resample means.
inline std::pair<double, double> bootstrap_ci(const std::vector<double>& cell_deltas,
                                              int resamples, double level, std::uint64_t seed) {
  if (cell_deltas.size() < 2)
    throw std::invalid_argument("bootstrap_ci requires at least two cells");
  if (resamples < 1) throw std::invalid_argument("bootstrap_ci requires resamples >= 1");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("level must be in (0,1)");
  SplitMix64 g(seed);
  const std::size_t n = cell_deltas.size();
  std::vector<double> means;
  means.reserve(static_cast<std::size_t>(resamples));
  for (int r = 0; r < resamples; ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      s += cell_deltas[static_cast<std::size_t>(g.next_int(0, static_cast<std::int64_t>(n) - 1))];
    means.push_back(s / static_cast<double>(n));
  }
  std::sort(means.begin(), means.end());
  const double alpha = (1.0 - level) / 2.0;
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(means.size());
    std::size_t idx = pos <= 1.0 ? 0 : static_cast<std::size_t>(std::ceil(pos)) - 1;
    idx = std::min(idx, means.size() - 1);
    return means[idx];
  };
  return {quantile(alpha), quantile(1.0 - alpha)};
}

// Unweighted mean of per-cell (EM, F1) differences between two variant runs.
// Cells are matched on (benchmark, budget); a mismatch is an error.
inline std::pair<double, double> macro_delta(const std::vector<CellResult>& cells_a,
                                             const std::vector<CellResult>& cells_b) {
  if (cells_a.size() != cells_b.size() || cells_a.empty())
    throw std::invalid_argument("macro_delta requires matching nonempty cell sets");
  auto key = [](const CellResult& c) {
    return c.benchmark + "#" + std::to_string(c.budget_tool) + "," + std::to_string(c.budget_tok);
  };
  std::map<std::string, const CellResult*> index;
  for (const auto& c : cells_b) index[key(c)] = &c;
  double d_em = 0.0, d_f1 = 0.0;
  for (const auto& a : cells_a) {
    auto it = index.find(key(a));
    if (it == index.end()) throw std::invalid_argument("macro_delta cell key mismatch: " + key(a));
    d_em += a.mean_em() - it->second->mean_em();
    d_f1 += a.mean_f1() - it->second->mean_f1();
  }
  const double n = static_cast<double>(cells_a.size());
  return {d_em / n, d_f1 / n};
}

}  // namespace voi
