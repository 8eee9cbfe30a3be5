#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "s2da/data/utterances.hpp"
#include "s2da/metrics/metrics.hpp"
#include "s2da/unified/model.hpp"

namespace s2da::unified {

/// Token ids of one decoded segment with the decoder outputs that emitted them.
struct DecodedSegment {
  std::vector<TokenId> tokens;
  ad::Tensor features;  // [tokens, feature_dim]
};

/// Splits a hypothesis at <da_end>. Empty spans (leading or repeated
/// markers) are dropped; tokens after the last marker form a final segment.
/// When nothing remains, the single segment is the <eos> step.
struct SplitResult {
  std::vector<DecodedSegment> segments;
  bool had_boundary = false;
  bool empty_transcript = false;
};
SplitResult split_at_boundaries(const asr::Hypothesis& hyp);
/// The whole hypothesis as one segment, <da_end> removed.
SplitResult whole_hypothesis(const asr::Hypothesis& hyp);

struct RecognizedSegment {
  std::vector<std::string> words;
  std::string da_tag;
  double posterior = 0.0;
  std::vector<double> probs;
};

struct RecognizedTurn {
  std::string turn_id;
  /// Decoded tokens without <eos>, <da_end> markers included.
  std::vector<std::string> tokens;
  std::vector<RecognizedSegment> segments;
  bool had_boundary = false;
  bool truncated = false;
};

nlohmann::json to_json(const RecognizedTurn& turn);
RecognizedTurn recognized_turn_from_json(const nlohmann::json& j);

struct RecognizeOptions {
  std::size_t beam_width = 1;
  std::size_t n_best = 1;
  double length_penalty = 1.0;
  /// Split at <da_end> (turn units) or treat each unit as one segment.
  bool segment_at_boundaries = true;
};

/// Classification state shared by the turns of one conversation.
class ConversationRecognizer {
 public:
  ConversationRecognizer(const UnifiedModel& model, RecognizeOptions options);
  /// Decodes, segments, and classifies one unit in conversation order.
  RecognizedTurn recognize(const std::string& turn_id, const ad::Tensor& frames);

 private:
  const UnifiedModel& model_;
  RecognizeOptions options_;
  ad::Graph graph_;
  da::DialogContext context_;
};

/// Input of the DA model for a decoded segment in the model's mode.
da::SegmentInput segment_input(ad::Graph& g, const DecodedSegment& segment);

/// Gold side of a unit as a tagged turn.
metrics::TaggedTurn gold_tagged_turn(const data::Utterance& unit, const Vocabulary& vocab,
                                     const TagSet& tags);
metrics::TaggedTurn hypothesis_tagged_turn(const RecognizedTurn& turn);

struct Evaluation {
  metrics::MetricReport report;
  std::vector<RecognizedTurn> turns;
};

/// Recognizes every unit of every conversation and scores it against gold.
Evaluation evaluate(const UnifiedModel& model, const std::vector<data::ConversationUnits>& units,
                    const RecognizeOptions& options);

}  // namespace s2da::unified
