#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <ranges>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace s2da::metrics {

/// Levenshtein distance with unit costs.
template <std::ranges::random_access_range A, std::ranges::random_access_range B>
std::size_t edit_distance(const A& a, const B& b) {
  const std::size_t n = std::ranges::size(a), m = std::ranges::size(b);
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

inline constexpr const char* kBoundarySymbol = "<da_end>";

/// Drops boundary markers.
std::vector<std::string> strip_boundaries(std::span<const std::string> words);

/// 100 * d(ref, hyp) / |ref| after removing boundary markers from both.
double wer(std::span<const std::string> ref, std::span<const std::string> hyp);

/// 100 * mismatches / size.
double ler(std::span<const std::string> gold, std::span<const std::string> predicted);

/// Ordered set of segment-final word indices.
using BoundarySet = std::vector<std::size_t>;

/// d(G, P) = 1/2 (sum_g min_p |g - p| + sum_p min_g |p - g|).
double ser_distance(const BoundarySet& gold, const BoundarySet& predicted);

double nser(std::size_t gold_count, std::size_t predicted_count);

/// Words of one segment and its tag.
struct TaggedSegment {
  std::vector<std::string> words;
  std::string tag;
};
using TaggedTurn = std::vector<TaggedSegment>;

/// Every word replaced by its segment's tag.
std::vector<std::string> expand_tags(const TaggedTurn& turn);
BoundarySet boundaries_of(const TaggedTurn& turn);

double daer(const TaggedTurn& gold, const TaggedTurn& hypothesis);

/// Numerator and denominator behind a percentage.
struct Counts {
  double numerator = 0;
  double denominator = 0;

  double percent() const { return denominator > 0 ? 100.0 * numerator / denominator : 0.0; }
  void add(double num, double den) {
    numerator += num;
    denominator += den;
  }
  friend bool operator==(const Counts&, const Counts&) = default;
};

/// Micro-averaged corpus metrics. A metric is present once anything was
/// accumulated into it.
struct MetricReport {
  std::optional<Counts> wer, ler, ser, nser, daer;
  /// Turns whose predicted segmentation differed from gold and were left out of LER.
  std::size_t ler_skipped_turns = 0;

  void add_wer(std::span<const std::string> ref, std::span<const std::string> hyp);
  void add_ler(std::span<const std::string> gold, std::span<const std::string> predicted);
  /// Normalized by the gold turn's word count.
  void add_ser(const BoundarySet& gold, const BoundarySet& predicted, std::size_t gold_words);
  void add_nser(std::size_t gold_count, std::size_t predicted_count);
  void add_daer(const TaggedTurn& gold, const TaggedTurn& hypothesis);
  /// WER, SER, NSER and DAER of one turn; LER too when segment counts agree.
  void add_turn(const TaggedTurn& gold, const TaggedTurn& hypothesis);

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

nlohmann::json to_json(const MetricReport& report);
MetricReport report_from_json(const nlohmann::json& j);
/// Fixed-width table with two decimals per percentage.
std::string format_table(const MetricReport& report);

}  // namespace s2da::metrics
