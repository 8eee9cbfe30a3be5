#pragma once

#include <span>
#include <vector>

#include "json.hpp"
#include "s2da/asr/search.hpp"
#include "s2da/asr/vocabulary.hpp"
#include "s2da/nn/attention.hpp"
#include "s2da/nn/layers.hpp"

namespace s2da::asr {

using ad::Graph;
using ad::ParameterStore;
using ad::Tensor;
using ad::Var;

struct AsrConfig {
  std::size_t feature_dim = 16;
  std::size_t vocab_size = 0;
  std::size_t encoder_hidden = 32;
  std::size_t encoder_layers = 2;
  /// Subsampling factor applied after each encoder layer.
  std::vector<std::size_t> subsample = {2, 1};
  std::size_t embedding_dim = 32;
  std::size_t decoder_hidden = 64;
  nn::AttentionOptions attention = {32, 11, 8};

  void validate() const;
};

nlohmann::json to_json(const AsrConfig& c);
AsrConfig asr_config_from_json(const nlohmann::json& j);

struct DecoderState {
  nn::LstmState lstm;
  Var weights;  // previous attention weights [1, T]
};

struct DecoderStep {
  DecoderState state;
  Var output;  // o_l, [1, decoder_hidden]
  Var logits;  // [1, vocab]
};

/// Output of a teacher-forced pass over one utterance.
struct TeacherForced {
  Var loss_sum;   // summed token cross-entropy, [1,1]
  Var features;   // o_1..o_L, [L, decoder_hidden]
  Var logits;     // [L, vocab]
  std::size_t tokens = 0;
};

/// Attention encoder-decoder emitting whole words.
///   s_l = LSTM(s_{l-1}, [embed(w_{l-1}); c_l]),  c_l = attend(s_{l-1}, H, alpha_{l-1})
///   o_l = h of s_l,  P(w_l) = softmax(o_l W + b)
class AsrModel {
 public:
  struct Encoded {
    nn::LocationAwareAttention::Keys keys;
    std::size_t length = 0;
  };

  AsrModel(ParameterStore& store, const AsrConfig& config, const std::string& prefix = "asr");

  const AsrConfig& config() const { return config_; }
  std::size_t feature_size() const { return config_.decoder_hidden; }

  Encoded encode(Graph& g, const Tensor& frames) const;
  DecoderState initial_state(Graph& g, const Encoded& enc) const;
  /// Throws std::invalid_argument for an out-of-range previous word.
  DecoderStep decode_step(Graph& g, const Encoded& enc, const DecoderState& state,
                          TokenId previous) const;

  /// Targets must end with <eos>; <sos> is fed before the first target.
  TeacherForced teacher_force(Graph& g, const Tensor& frames,
                              std::span<const TokenId> targets) const;

  std::size_t default_max_len(std::size_t frames) const;
  Hypothesis greedy_decode(const Tensor& frames, std::size_t max_len = 0) const;
  std::vector<Hypothesis> beam_decode(const Tensor& frames, BeamOptions options) const;

  /// Parameter name prefix, e.g. "asr.encoder".
  const std::string& prefix() const { return prefix_; }
  std::string encoder_prefix() const { return prefix_ + ".encoder"; }

 private:
  AsrConfig config_;
  std::string prefix_;
  nn::BiLstmEncoder encoder_;
  nn::Embedding embedding_;
  nn::LstmCell decoder_;
  nn::LocationAwareAttention attention_;
  nn::Dense output_;
};

/// Beam-search adapter over one utterance. Holds its own graph.
class AsrScorer {
 public:
  using State = DecoderState;

  AsrScorer(const AsrModel& model, const Tensor& frames);
  std::size_t vocab_size() const { return model_.config().vocab_size; }
  TokenId start_token() const { return Vocabulary::kSos; }
  TokenId end_token() const { return Vocabulary::kEos; }
  State initial_state();
  ScoredStep<State> step(const State& state, TokenId previous);
  std::size_t encoder_length() const { return encoded_.length; }

 private:
  const AsrModel& model_;
  Graph graph_;
  AsrModel::Encoded encoded_;
};

/// Mean per-token cross-entropy over a batch, [1,1].
struct BatchLoss {
  Var loss;
  std::size_t tokens = 0;
  std::vector<TeacherForced> items;
};
BatchLoss asr_batch_loss(Graph& g, const AsrModel& model, std::span<const Tensor* const> frames,
                         std::span<const std::vector<TokenId>* const> targets);

}  // namespace s2da::asr
