#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <stdexcept>
#include <vector>

#include "s2da/asr/vocabulary.hpp"

namespace s2da::asr {

/// One decoded sequence. `features` holds one row per token (the decoder
/// output that produced it); a complete hypothesis ends with the end token.
struct Hypothesis {
  std::vector<TokenId> tokens;
  std::vector<std::vector<double>> features;
  double log_score = 0.0;
  double normalized_score = 0.0;
  bool complete = false;

  /// Tokens without the trailing end token.
  std::vector<TokenId> body(TokenId eos = Vocabulary::kEos) const {
    std::vector<TokenId> out = tokens;
    if (!out.empty() && out.back() == eos) out.pop_back();
    return out;
  }
};

template <class State>
struct ScoredStep {
  State next;
  std::vector<double> log_probs;
  std::vector<double> feature;
};

/// A left-to-right model that can be searched: start_token() is fed first,
/// and its own id is never emitted.
template <class S>
concept StepScorer = requires(S s, const typename S::State& st, TokenId t) {
  { s.vocab_size() } -> std::convertible_to<std::size_t>;
  { s.start_token() } -> std::convertible_to<TokenId>;
  { s.end_token() } -> std::convertible_to<TokenId>;
  { s.initial_state() } -> std::same_as<typename S::State>;
  { s.step(st, t) } -> std::same_as<ScoredStep<typename S::State>>;
};

struct BeamOptions {
  std::size_t beam_width = 5;
  std::size_t n_best = 1;
  double length_penalty = 1.0;
  /// 0 selects the model's default.
  std::size_t max_len = 0;
};

inline double normalize_score(double log_score, std::size_t length, double gamma) {
  if (length == 0) return log_score;
  return log_score / std::pow(static_cast<double>(length), gamma);
}

/// Higher normalized score first; ties go to the lexicographically lower sequence.
inline bool hypothesis_before(const Hypothesis& a, const Hypothesis& b) {
  if (a.normalized_score != b.normalized_score) return a.normalized_score > b.normalized_score;
  return a.tokens < b.tokens;
}

template <StepScorer S>
Hypothesis greedy_search(S& scorer, std::size_t max_len, double length_penalty = 1.0) {
  if (max_len < 1) throw std::invalid_argument("greedy search: max_len must be at least 1");
  Hypothesis hyp;
  auto state = scorer.initial_state();
  TokenId prev = scorer.start_token();
  while (hyp.tokens.size() < max_len) {
    auto step = scorer.step(state, prev);
    TokenId best = -1;
    for (std::size_t v = 0; v < step.log_probs.size(); ++v) {
      if (static_cast<TokenId>(v) == scorer.start_token()) continue;
      if (best < 0 || step.log_probs[v] > step.log_probs[static_cast<std::size_t>(best)]) {
        best = static_cast<TokenId>(v);
      }
    }
    hyp.tokens.push_back(best);
    hyp.features.push_back(std::move(step.feature));
    hyp.log_score += step.log_probs[static_cast<std::size_t>(best)];
    state = std::move(step.next);
    prev = best;
    if (best == scorer.end_token()) {
      hyp.complete = true;
      break;
    }
  }
  hyp.normalized_score = normalize_score(hyp.log_score, hyp.tokens.size(), length_penalty);
  return hyp;
}

/// Keeps the best `beam_width` extensions of the live hypotheses at every
/// step. Extensions ending in the end token leave the beam as finished;
/// hypotheses still live at max_len are kept as incomplete. Returns up to
/// n_best hypotheses ordered by hypothesis_before.
template <StepScorer S>
std::vector<Hypothesis> beam_search(S& scorer, const BeamOptions& options) {
  if (options.beam_width < 1) throw std::invalid_argument("beam search: beam width must be at least 1");
  if (options.n_best < 1 || options.n_best > options.beam_width) {
    throw std::invalid_argument("beam search: n_best must lie in [1, beam width]");
  }
  if (options.max_len < 1) throw std::invalid_argument("beam search: max_len must be at least 1");
  using State = typename S::State;
  struct Live {
    Hypothesis hyp;
    State state;
  };
  struct Candidate {
    std::size_t parent;
    TokenId token;
    double log_score;
    std::vector<TokenId> tokens;
  };

  std::vector<Live> live;
  live.push_back({Hypothesis{}, scorer.initial_state()});
  std::vector<Hypothesis> finished;

  for (std::size_t len = 0; len < options.max_len && !live.empty(); ++len) {
    std::vector<ScoredStep<State>> steps;
    std::vector<Candidate> candidates;
    for (std::size_t i = 0; i < live.size(); ++i) {
      const TokenId prev = live[i].hyp.tokens.empty() ? scorer.start_token() : live[i].hyp.tokens.back();
      steps.push_back(scorer.step(live[i].state, prev));
      const auto& lp = steps.back().log_probs;
      for (std::size_t v = 0; v < lp.size(); ++v) {
        if (static_cast<TokenId>(v) == scorer.start_token()) continue;
        if (lp[v] == -std::numeric_limits<double>::infinity()) continue;
        Candidate c{i, static_cast<TokenId>(v), live[i].hyp.log_score + lp[v], live[i].hyp.tokens};
        c.tokens.push_back(c.token);
        candidates.push_back(std::move(c));
      }
    }
    const std::size_t keep = std::min(options.beam_width, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), [](const Candidate& a, const Candidate& b) {
                        if (a.log_score != b.log_score) return a.log_score > b.log_score;
                        return a.tokens < b.tokens;
                      });
    std::vector<Live> next;
    for (std::size_t k = 0; k < keep; ++k) {
      auto& c = candidates[k];
      const auto& step = steps[c.parent];
      Hypothesis h;
      h.tokens = std::move(c.tokens);
      h.features = live[c.parent].hyp.features;
      h.features.push_back(step.feature);
      h.log_score = c.log_score;
      h.normalized_score = normalize_score(h.log_score, h.tokens.size(), options.length_penalty);
      if (c.token == scorer.end_token()) {
        h.complete = true;
        finished.push_back(std::move(h));
      } else {
        next.push_back({std::move(h), step.next});
      }
    }
    live = std::move(next);
  }
  for (auto& l : live) finished.push_back(std::move(l.hyp));
  std::sort(finished.begin(), finished.end(), hypothesis_before);
  if (finished.size() > options.n_best) finished.resize(options.n_best);
  return finished;
}

}  // namespace s2da::asr
