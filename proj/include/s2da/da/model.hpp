#pragma once

#include <deque>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "s2da/asr/vocabulary.hpp"
#include "s2da/da/tag_set.hpp"
#include "s2da/nn/layers.hpp"

namespace s2da::da {

using ad::Graph;
using ad::ParameterStore;
using ad::Tensor;
using ad::Var;

/// What the word-level encoder reads at each position.
enum class InputMode {
  kWordEmbedding,  // w_l
  kAsrFeature,     // o_l
  kHybrid,         // o_l + w_l
};

std::string to_string(InputMode mode);
/// Accepts "embed", "asrfeat" and "hybrid".
InputMode parse_input_mode(const std::string& name);

struct DaConfig {
  InputMode mode = InputMode::kWordEmbedding;
  std::size_t vocab_size = 0;
  std::size_t num_tags = 0;
  std::size_t embedding_dim = 64;
  /// Width of the incoming ASR features; projected to embedding_dim when different.
  std::size_t feature_dim = 64;
  std::size_t word_hidden = 32;
  std::size_t word_layers = 2;
  std::size_t utterance_hidden = 64;
  std::size_t history = 1;

  void validate() const;
};

nlohmann::json to_json(const DaConfig& c);
DaConfig da_config_from_json(const nlohmann::json& j);

/// One segment as seen by the classifier. `features` is [L, feature_dim]
/// and required in the ASR-feature and hybrid modes.
struct SegmentInput {
  std::vector<TokenId> words;
  Var features;
};

/// The most recent `history` segment encodings of one conversation stream.
class DialogContext {
 public:
  explicit DialogContext(std::size_t history);
  void push(Var encoding);
  /// Oldest first; the last entry is the segment being classified.
  std::vector<Var> window() const { return {ring_.begin(), ring_.end()}; }
  std::size_t size() const { return ring_.size(); }
  std::size_t history() const { return history_; }
  void clear() { ring_.clear(); }

 private:
  std::size_t history_;
  std::deque<Var> ring_;
};

struct TagDistribution {
  std::vector<double> probs;
  TagId predicted = 0;
};

/// argmax with ties going to the lowest id.
TagId argmax_tag(std::span<const double> probs);

/// Hierarchical classifier: word-level BiLSTM encoder per segment, an
/// utterance-level LSTM re-run over the most recent h encodings from a
/// learned initial state, and a dense projection onto the tag set.
class DaModel {
 public:
  DaModel(ParameterStore& store, const DaConfig& config, const std::string& prefix = "da");

  const DaConfig& config() const { return config_; }
  const std::string& prefix() const { return prefix_; }

  /// sigma: concatenated final forward and backward states, [1, 2*word_hidden].
  Var encode_segment(Graph& g, const SegmentInput& input) const;
  /// Tag logits [1, tags] for a window of encodings (oldest first).
  Var logits(Graph& g, std::span<const Var> window) const;

  /// Pushes the encoding into the context and classifies it.
  Var classify_logits(Graph& g, DialogContext& context, Var encoding) const;
  TagDistribution classify(Graph& g, DialogContext& context, Var encoding) const;

  /// Logits of every segment of a conversation in order, [K, tags].
  Var conversation_logits(Graph& g, std::span<const SegmentInput> segments) const;
  /// Mean cross-entropy over the segments, [1,1].
  Var conversation_loss(Graph& g, std::span<const SegmentInput> segments,
                        std::span<const TagId> tags) const;

 private:
  DaConfig config_;
  std::string prefix_;
  nn::Embedding embedding_;
  nn::Dense feature_projection_;
  bool project_features_ = false;
  nn::BiLstmEncoder word_encoder_;
  nn::LstmCell utterance_encoder_;
  ad::Parameter* initial_h_ = nullptr;
  ad::Parameter* initial_c_ = nullptr;
  nn::Dense output_;
};

/// Mixture of per-hypothesis tag distributions weighted by softmax(scores).
TagDistribution combine_nbest(std::span<const std::vector<double>> distributions,
                              std::span<const double> normalized_scores);

}  // namespace s2da::da
