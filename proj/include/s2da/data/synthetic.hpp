#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "s2da/data/corpus.hpp"

namespace s2da::data {

/// A segment template is a slot sequence. A slot is either a literal word,
/// "_" (one filler word) or "?" (a filler word with probability 1/2).
using SegmentTemplate = std::vector<std::string>;

struct SyntheticSpec {
  std::size_t vocab_size = 50;
  std::size_t num_tags = 8;
  std::size_t dim = 16;
  double sigma = 0.3;
  std::size_t pause_frames = 0;
  std::size_t min_frames_per_token = 2;
  std::size_t max_frames_per_token = 4;

  std::size_t conversations = 200;
  std::size_t segments_per_conversation = 20;
  std::size_t max_segments_per_turn = 3;
  std::size_t validation_conversations = 20;
  std::size_t test_conversations = 20;

  /// Words reserved for filler slots; the rest become tag keywords.
  std::size_t filler_words = 18;
  std::size_t templates_per_tag = 3;
  /// Probability that a segment is rendered with another tag's template.
  double tag_ambiguity = 0.1;
  /// Probability mass on each tag's preferred successor in the tag chain.
  double transition_bias = 0.5;

  std::uint64_t seed = 1;

  /// When non-empty, replaces the generated templates. Keys are tag names.
  std::map<std::string, std::vector<SegmentTemplate>> templates;

  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;
};

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SyntheticSpec& spec);

struct SyntheticCorpus {
  Corpus corpus;
  /// Row i is the prototype of words[i]; the silence prototype is the zero vector.
  std::vector<std::string> words;
  ad::Tensor prototypes;
  std::map<std::string, std::vector<SegmentTemplate>> templates;
};

/// Every segment gets a frame span; each segment is followed by
/// `pause_frames` noisy silence frames.
SyntheticCorpus synthesize_corpus(const SyntheticSpec& spec);

/// Word names used by the generator: w00, w01, ...
std::string synthetic_word(std::size_t index, std::size_t vocab_size);

}  // namespace s2da::data
