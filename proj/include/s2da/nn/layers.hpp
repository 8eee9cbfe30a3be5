#pragma once

#include <span>
#include <string>
#include <vector>

#include "s2da/autodiff/graph.hpp"
#include "s2da/autodiff/parameter.hpp"

namespace s2da::nn {

using ad::Graph;
using ad::Parameter;
using ad::ParameterStore;
using ad::Var;

/// y = x W + b, W Xavier-initialized.
class Dense {
 public:
  Dense() = default;
  Dense(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
        bool with_bias = true);

  Var operator()(Graph& g, Var x) const;
  std::size_t in_size() const { return in_; }
  std::size_t out_size() const { return out_; }

 private:
  Parameter* weight_ = nullptr;
  Parameter* bias_ = nullptr;
  std::size_t in_ = 0;
  std::size_t out_ = 0;
};

class Embedding {
 public:
  Embedding() = default;
  Embedding(ParameterStore& store, const std::string& name, std::size_t vocab, std::size_t dim);

  /// [ids.size(), dim]
  Var operator()(Graph& g, std::span<const int> ids) const;
  std::size_t vocab_size() const { return vocab_; }
  std::size_t dim() const { return dim_; }

 private:
  Parameter* table_ = nullptr;
  std::size_t vocab_ = 0;
  std::size_t dim_ = 0;
};

struct LstmState {
  Var h;  // [1, hidden]
  Var c;  // [1, hidden]
};

/// Standard LSTM cell with gate blocks ordered (input, forget, cell, output):
///   z = x W_x + h W_h + b
///   c' = sigmoid(z_f) * c + sigmoid(z_i) * tanh(z_g)
///   h' = sigmoid(z_o) * tanh(c')
class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(ParameterStore& store, const std::string& name, std::size_t input_size,
           std::size_t hidden_size);

  LstmState initial_state(Graph& g) const;
  /// Input contribution for a whole sequence at once: X W_x + b, [T, 4*hidden].
  Var project_inputs(Graph& g, Var inputs) const;
  /// One step from a precomputed input projection row [1, 4*hidden].
  LstmState step_projected(Graph& g, Var projected_input, const LstmState& state) const;
  LstmState step(Graph& g, Var input, const LstmState& state) const;
  /// Runs over all rows of `inputs` ([T, input_size]); returns h_t in time order.
  std::vector<Var> run(Graph& g, Var inputs, const LstmState& init, bool reverse) const;

  std::size_t input_size() const { return input_size_; }
  std::size_t hidden_size() const { return hidden_size_; }
  Parameter& input_weight() const { return *w_input_; }
  Parameter& hidden_weight() const { return *w_hidden_; }
  Parameter& bias() const { return *bias_; }

 private:
  Parameter* w_input_ = nullptr;
  Parameter* w_hidden_ = nullptr;
  Parameter* bias_ = nullptr;
  std::size_t input_size_ = 0;
  std::size_t hidden_size_ = 0;
};

struct BiLstmOutput {
  Var sequence;       // [T, 2*hidden], forward half first
  Var final_forward;  // [1, hidden], forward state after the last frame
  Var final_backward; // [1, hidden], backward state after the first frame
};

class BiLstm {
 public:
  BiLstm() = default;
  BiLstm(ParameterStore& store, const std::string& name, std::size_t input_size,
         std::size_t hidden_size);

  BiLstmOutput operator()(Graph& g, Var inputs) const;
  const LstmCell& forward_cell() const { return forward_; }
  const LstmCell& backward_cell() const { return backward_; }
  std::size_t output_size() const { return 2 * forward_.hidden_size(); }

 private:
  LstmCell forward_;
  LstmCell backward_;
};

/// H = (h_1..h_T'), one row per retained frame.
struct EncoderState {
  Var hidden;  // [T', 2*hidden]
  std::size_t length() const { return hidden.rows(); }
};

/// Stack of bidirectional layers with optional temporal subsampling after
/// each layer (keeps frames 0, f, 2f, ...; output length ceil(T/f)).
class BiLstmEncoder {
 public:
  BiLstmEncoder() = default;
  BiLstmEncoder(ParameterStore& store, const std::string& name, std::size_t input_size,
                std::size_t hidden_size, std::size_t layers,
                std::vector<std::size_t> subsample_after);

  EncoderState operator()(Graph& g, Var frames) const;
  std::size_t output_size() const { return layers_.empty() ? 0 : layers_.back().output_size(); }
  std::size_t output_length(std::size_t frames) const;

 private:
  std::vector<BiLstm> layers_;
  std::vector<std::size_t> subsample_;
};

}  // namespace s2da::nn
