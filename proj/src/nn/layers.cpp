#include "s2da/nn/layers.hpp"

#include <stdexcept>

namespace s2da::nn {

using ad::Init;
using ad::Shape;
using ad::Tensor;

Dense::Dense(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
             bool with_bias)
    : in_(in), out_(out) {
  weight_ = &store.add(name + ".W", Shape{in, out}, Init::kXavierUniform);
  if (with_bias) bias_ = &store.add(name + ".b", Shape{1, out}, Init::kZeros);
}

Var Dense::operator()(Graph& g, Var x) const {
  Var y = ad::matmul(x, g.param(*weight_));
  return bias_ ? ad::add_row(y, g.param(*bias_)) : y;
}

Embedding::Embedding(ParameterStore& store, const std::string& name, std::size_t vocab,
                     std::size_t dim)
    : vocab_(vocab), dim_(dim) {
  table_ = &store.add(name + ".table", Shape{vocab, dim}, Init::kUniform008);
}

Var Embedding::operator()(Graph& g, std::span<const int> ids) const {
  return g.embedding(g.param(*table_), ids);
}

LstmCell::LstmCell(ParameterStore& store, const std::string& name, std::size_t input_size,
                   std::size_t hidden_size)
    : input_size_(input_size), hidden_size_(hidden_size) {
  w_input_ = &store.add(name + ".W_x", Shape{input_size, 4 * hidden_size}, Init::kUniform008);
  w_hidden_ = &store.add(name + ".W_h", Shape{hidden_size, 4 * hidden_size}, Init::kUniform008);
  bias_ = &store.add(name + ".b", Shape{1, 4 * hidden_size}, Init::kZeros);
}

LstmState LstmCell::initial_state(Graph& g) const {
  return {g.constant(Tensor::zeros(1, hidden_size_)), g.constant(Tensor::zeros(1, hidden_size_))};
}

Var LstmCell::project_inputs(Graph& g, Var inputs) const {
  if (inputs.cols() != input_size_) {
    throw ad::ShapeError("lstm: input width " + std::to_string(inputs.cols()) +
                         " does not match input_size " + std::to_string(input_size_));
  }
  return ad::add_row(ad::matmul(inputs, g.param(*w_input_)), g.param(*bias_));
}

LstmState LstmCell::step_projected(Graph& g, Var projected_input, const LstmState& state) const {
  const std::size_t h = hidden_size_;
  if (state.h.cols() != h || state.c.cols() != h) {
    throw ad::ShapeError("lstm: state width does not match hidden_size " + std::to_string(h));
  }
  Var z = projected_input + ad::matmul(state.h, g.param(*w_hidden_));
  Var in_gate = ad::sigmoid(g.slice_cols(z, 0, h));
  Var forget_gate = ad::sigmoid(g.slice_cols(z, h, 2 * h));
  Var candidate = ad::tanh(g.slice_cols(z, 2 * h, 3 * h));
  Var out_gate = ad::sigmoid(g.slice_cols(z, 3 * h, 4 * h));
  Var c = forget_gate * state.c + in_gate * candidate;
  Var out = out_gate * ad::tanh(c);
  return {out, c};
}

LstmState LstmCell::step(Graph& g, Var input, const LstmState& state) const {
  return step_projected(g, project_inputs(g, input), state);
}

std::vector<Var> LstmCell::run(Graph& g, Var inputs, const LstmState& init, bool reverse) const {
  Var proj = project_inputs(g, inputs);
  const std::size_t t_len = inputs.rows();
  std::vector<Var> hs(t_len);
  LstmState s = init;
  for (std::size_t k = 0; k < t_len; ++k) {
    const std::size_t t = reverse ? t_len - 1 - k : k;
    s = step_projected(g, t_len == 1 ? proj : g.slice_rows(proj, t, t + 1), s);
    hs[t] = s.h;
  }
  return hs;
}

BiLstm::BiLstm(ParameterStore& store, const std::string& name, std::size_t input_size,
               std::size_t hidden_size)
    : forward_(store, name + ".fwd", input_size, hidden_size),
      backward_(store, name + ".bwd", input_size, hidden_size) {}

BiLstmOutput BiLstm::operator()(Graph& g, Var inputs) const {
  if (inputs.rows() == 0) throw std::invalid_argument("bilstm: empty input sequence");
  auto fw = forward_.run(g, inputs, forward_.initial_state(g), false);
  auto bw = backward_.run(g, inputs, backward_.initial_state(g), true);
  Var fseq = ad::concat_rows(fw);
  Var bseq = ad::concat_rows(bw);
  return {ad::concat_cols({fseq, bseq}), fw.back(), bw.front()};
}

BiLstmEncoder::BiLstmEncoder(ParameterStore& store, const std::string& name,
                             std::size_t input_size, std::size_t hidden_size, std::size_t layers,
                             std::vector<std::size_t> subsample_after)
    : subsample_(std::move(subsample_after)) {
  if (layers == 0) throw std::invalid_argument("encoder needs at least one layer");
  subsample_.resize(layers, 1);
  for (std::size_t& f : subsample_) {
    if (f == 0) f = 1;
  }
  std::size_t in = input_size;
  for (std::size_t l = 0; l < layers; ++l) {
    layers_.emplace_back(store, name + ".layer" + std::to_string(l), in, hidden_size);
    in = 2 * hidden_size;
  }
}

std::size_t BiLstmEncoder::output_length(std::size_t frames) const {
  for (std::size_t f : subsample_) frames = (frames + f - 1) / f;
  return frames;
}

EncoderState BiLstmEncoder::operator()(Graph& g, Var frames) const {
  if (frames.rows() == 0) throw std::invalid_argument("encoder: empty frame sequence");
  Var x = frames;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    x = layers_[l](g, x).sequence;
    const std::size_t f = subsample_[l];
    if (f > 1 && x.rows() > 1) {
      std::vector<std::size_t> keep;
      for (std::size_t t = 0; t < x.rows(); t += f) keep.push_back(t);
      x = g.select_rows(x, keep);
    }
  }
  return {x};
}

}  // namespace s2da::nn
