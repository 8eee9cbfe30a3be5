#pragma once

#include <span>
#include <string>
#include <vector>

#include "s2da/data/utterances.hpp"
#include "s2da/metrics/metrics.hpp"
#include "s2da/nn/layers.hpp"
#include "s2da/unified/training.hpp"

namespace s2da::unified {

struct SegmenterConfig {
  std::size_t vocab_size = 0;
  std::size_t embedding_dim = 32;
  std::size_t hidden = 32;
  std::size_t layers = 1;
};

/// Text-only segmenter: a BiLSTM tagger labelling each word as the last word
/// of a segment or not. The final word of a turn always closes a segment.
class TextSegmenter {
 public:
  TextSegmenter(ad::ParameterStore& store, const SegmenterConfig& config,
                const std::string& prefix = "seg");

  /// [L, 2]; column 1 scores "segment ends here".
  ad::Var logits(ad::Graph& g, std::span<const TokenId> words) const;
  /// Summed cross-entropy over the words of one turn, [1,1].
  ad::Var loss(ad::Graph& g, std::span<const TokenId> words, const metrics::BoundarySet& ends) const;
  metrics::BoundarySet predict(std::span<const TokenId> words) const;

 private:
  SegmenterConfig config_;
  nn::Embedding embedding_;
  nn::BiLstmEncoder encoder_;
  nn::Dense output_;
};

/// Trains on gold word sequences and gold segment ends of every unit.
TrainingHistory train_segmenter(TextSegmenter& segmenter, ad::ParameterStore& store,
                                const std::vector<data::ConversationUnits>& units,
                                const TrainingConfig& config, const TrainingLog& log = {});

}  // namespace s2da::unified
