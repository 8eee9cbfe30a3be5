#include "s2da/nn/attention.hpp"

#include <stdexcept>

namespace s2da::nn {

using ad::Init;
using ad::Shape;
using ad::Tensor;

LocationAwareAttention::LocationAwareAttention(ParameterStore& store, const std::string& name,
                                               std::size_t query_size, std::size_t encoder_size,
                                               AttentionOptions options)
    : query_size_(query_size), encoder_size_(encoder_size), options_(options) {
  if (options_.conv_width % 2 == 0) {
    throw std::invalid_argument("attention conv width must be odd");
  }
  const std::size_t a = options_.attention_dim;
  query_proj_ = &store.add(name + ".W_query", Shape{query_size, a}, Init::kXavierUniform);
  key_proj_ = &store.add(name + ".W_key", Shape{encoder_size, a}, Init::kXavierUniform);
  location_proj_ =
      &store.add(name + ".W_location", Shape{options_.conv_channels, a}, Init::kXavierUniform);
  bias_ = &store.add(name + ".b", Shape{1, a}, Init::kZeros);
  score_ = &store.add(name + ".v", Shape{a, 1}, Init::kXavierUniform);
  conv_ = &store.add(name + ".conv",
                     Shape{options_.conv_width, options_.conv_channels}, Init::kXavierUniform);
}

LocationAwareAttention::Keys LocationAwareAttention::prepare(Graph& g,
                                                              const EncoderState& encoder) const {
  if (encoder.hidden.cols() != encoder_size_) {
    throw ad::ShapeError("attention: encoder width " + std::to_string(encoder.hidden.cols()) +
                         " does not match " + std::to_string(encoder_size_));
  }
  return {encoder.hidden, ad::matmul(encoder.hidden, g.param(*key_proj_))};
}

Var LocationAwareAttention::initial_weights(Graph& g, std::size_t length) const {
  return g.constant(Tensor(Shape{1, length}, 1.0 / static_cast<double>(length)));
}

LocationAwareAttention::Result LocationAwareAttention::operator()(Graph& g, Var query,
                                                                  const Keys& keys,
                                                                  Var previous_weights) const {
  const std::size_t t_len = keys.encoded.rows();
  if (previous_weights.rows() != 1 || previous_weights.cols() != t_len) {
    throw std::invalid_argument("attention: previous weights " + previous_weights.shape().str() +
                                " do not match encoder length " + std::to_string(t_len));
  }
  // Location features: [T, K] window of alpha_{l-1} times kernel [K, C].
  Var window = g.unfold_rows(ad::transpose(previous_weights), options_.conv_width);
  Var location = ad::matmul(window, g.param(*conv_));
  Var energy_in = keys.projected + ad::matmul(location, g.param(*location_proj_));
  Var query_term = ad::add_row(ad::matmul(query, g.param(*query_proj_)), g.param(*bias_));
  Var hidden = ad::tanh(ad::add_row(energy_in, query_term));
  Var scores = ad::matmul(hidden, g.param(*score_));  // [T, 1]
  Var weights = ad::softmax(ad::transpose(scores));   // [1, T]
  Var context = ad::matmul(weights, keys.encoded);    // [1, enc]
  return {context, weights};
}

}  // namespace s2da::nn
