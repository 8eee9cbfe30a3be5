#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <random>
#include <set>
#include <span>
#include <vector>

namespace s2da::testing {

/// Plain recursion over the three edit operations, no memo table. Matching
/// heads are consumed directly, which never changes the optimum.
inline std::size_t recursive_edit_distance(std::span<const int> a, std::span<const int> b) {
  if (a.empty()) return b.size();
  if (b.empty()) return a.size();
  if (a.front() == b.front()) return recursive_edit_distance(a.subspan(1), b.subspan(1));
  return 1 + std::min({recursive_edit_distance(a.subspan(1), b.subspan(1)),
                       recursive_edit_distance(a.subspan(1), b),
                       recursive_edit_distance(a, b.subspan(1))});
}

/// Direct evaluation of the symmetric boundary distance over all pairs.
inline double direct_ser_distance(const std::vector<std::size_t>& g,
                                  const std::vector<std::size_t>& p) {
  double left = 0, right = 0;
  for (std::size_t x : g) {
    double best = INFINITY;
    for (std::size_t y : p) best = std::min(best, std::fabs(double(x) - double(y)));
    left += best;
  }
  for (std::size_t y : p) {
    double best = INFINITY;
    for (std::size_t x : g) best = std::min(best, std::fabs(double(y) - double(x)));
    right += best;
  }
  return (left + right) / 2;
}

inline std::vector<int> random_sequence(std::mt19937_64& rng, std::size_t max_len, int alphabet) {
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<int> sym(0, alphabet - 1);
  std::vector<int> out(len(rng));
  for (int& v : out) v = sym(rng);
  return out;
}

/// Random non-empty boundary set within [0, span).
inline std::vector<std::size_t> random_boundaries(std::mt19937_64& rng, std::size_t span) {
  std::uniform_int_distribution<std::size_t> count(1, std::min<std::size_t>(span, 6));
  std::uniform_int_distribution<std::size_t> pos(0, span - 1);
  std::set<std::size_t> s;
  const std::size_t n = count(rng);
  while (s.size() < n) s.insert(pos(rng));
  return {s.begin(), s.end()};
}

}  // namespace s2da::testing
