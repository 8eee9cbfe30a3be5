#pragma once

#include "s2da/nn/layers.hpp"

namespace s2da::nn {

struct AttentionOptions {
  std::size_t attention_dim = 64;
  std::size_t conv_width = 11;  // odd
  std::size_t conv_channels = 8;
};

/// Location-aware (hybrid content + location) attention.
///
///   f_l     = conv1d(alpha_{l-1})                      [T, C], width K, zero padded
///   e_{l,t} = v^T tanh(W s_{l-1} + V h_t + U f_{l,t} + b)
///   alpha_l = softmax_t(e_l)
///   c_l     = sum_t alpha_{l,t} h_t
class LocationAwareAttention {
 public:
  /// Per-utterance precomputation: the encoder states and V h_t for all t.
  struct Keys {
    Var encoded;    // [T, enc]
    Var projected;  // [T, A]
  };
  struct Result {
    Var context;  // [1, enc]
    Var weights;  // [1, T]
  };

  LocationAwareAttention() = default;
  LocationAwareAttention(ParameterStore& store, const std::string& name, std::size_t query_size,
                         std::size_t encoder_size, AttentionOptions options);

  Keys prepare(Graph& g, const EncoderState& encoder) const;
  Result operator()(Graph& g, Var query, const Keys& keys, Var previous_weights) const;
  /// Uniform alpha_0 = 1/T.
  Var initial_weights(Graph& g, std::size_t length) const;

  const AttentionOptions& options() const { return options_; }

 private:
  Parameter* query_proj_ = nullptr;     // W [query, A]
  Parameter* key_proj_ = nullptr;       // V [enc, A]
  Parameter* location_proj_ = nullptr;  // U [C, A]
  Parameter* bias_ = nullptr;           // b [1, A]
  Parameter* score_ = nullptr;          // v [A, 1]
  Parameter* conv_ = nullptr;           // [K, C]
  std::size_t query_size_ = 0;
  std::size_t encoder_size_ = 0;
  AttentionOptions options_;
};

}  // namespace s2da::nn
