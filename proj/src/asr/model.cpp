#include "s2da/asr/model.hpp"

#include <algorithm>
#include <stdexcept>

namespace s2da::asr {

void AsrConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("asr config: " + m); };
  if (feature_dim < 1) fail("feature_dim must be positive");
  if (vocab_size <= Vocabulary::kReservedCount) fail("vocabulary has no ordinary words");
  if (encoder_hidden < 1 || encoder_layers < 1) fail("encoder sizes must be positive");
  if (subsample.size() > encoder_layers) fail("more subsampling factors than encoder layers");
  for (std::size_t f : subsample) {
    if (f < 1) fail("subsampling factors must be positive");
  }
  if (embedding_dim < 1 || decoder_hidden < 1) fail("decoder sizes must be positive");
  if (attention.attention_dim < 1 || attention.conv_channels < 1) fail("attention sizes must be positive");
  if (attention.conv_width % 2 == 0) fail("attention conv_width must be odd");
}

nlohmann::json to_json(const AsrConfig& c) {
  return {{"feature_dim", c.feature_dim},
          {"vocab_size", c.vocab_size},
          {"encoder_hidden", c.encoder_hidden},
          {"encoder_layers", c.encoder_layers},
          {"subsample", c.subsample},
          {"embedding_dim", c.embedding_dim},
          {"decoder_hidden", c.decoder_hidden},
          {"attention_dim", c.attention.attention_dim},
          {"attention_conv_width", c.attention.conv_width},
          {"attention_conv_channels", c.attention.conv_channels}};
}

AsrConfig asr_config_from_json(const nlohmann::json& j) {
  AsrConfig c;
  c.feature_dim = j.value("feature_dim", c.feature_dim);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.encoder_hidden = j.value("encoder_hidden", c.encoder_hidden);
  c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
  c.subsample = j.value("subsample", c.subsample);
  c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
  c.decoder_hidden = j.value("decoder_hidden", c.decoder_hidden);
  c.attention.attention_dim = j.value("attention_dim", c.attention.attention_dim);
  c.attention.conv_width = j.value("attention_conv_width", c.attention.conv_width);
  c.attention.conv_channels = j.value("attention_conv_channels", c.attention.conv_channels);
  return c;
}

AsrModel::AsrModel(ParameterStore& store, const AsrConfig& config, const std::string& prefix)
    : config_(config), prefix_(prefix) {
  config_.validate();
  encoder_ = nn::BiLstmEncoder(store, prefix + ".encoder", config_.feature_dim,
                               config_.encoder_hidden, config_.encoder_layers, config_.subsample);
  embedding_ = nn::Embedding(store, prefix + ".embedding", config_.vocab_size, config_.embedding_dim);
  decoder_ = nn::LstmCell(store, prefix + ".decoder", config_.embedding_dim + encoder_.output_size(),
                          config_.decoder_hidden);
  attention_ = nn::LocationAwareAttention(store, prefix + ".attention", config_.decoder_hidden,
                                          encoder_.output_size(), config_.attention);
  output_ = nn::Dense(store, prefix + ".output", config_.decoder_hidden, config_.vocab_size);
}

AsrModel::Encoded AsrModel::encode(Graph& g, const Tensor& frames) const {
  if (frames.empty() || frames.rows() == 0) throw std::invalid_argument("asr: empty feature sequence");
  if (frames.cols() != config_.feature_dim) {
    throw ad::ShapeError("asr: feature dimension " + std::to_string(frames.cols()) +
                         " does not match model dimension " + std::to_string(config_.feature_dim));
  }
  const auto state = encoder_(g, g.constant(frames));
  return {attention_.prepare(g, state), state.length()};
}

DecoderState AsrModel::initial_state(Graph& g, const Encoded& enc) const {
  return {decoder_.initial_state(g), attention_.initial_weights(g, enc.length)};
}

DecoderStep AsrModel::decode_step(Graph& g, const Encoded& enc, const DecoderState& state,
                                  TokenId previous) const {
  if (previous < 0 || static_cast<std::size_t>(previous) >= config_.vocab_size) {
    throw std::invalid_argument("asr: invalid previous word id " + std::to_string(previous));
  }
  const int ids[] = {previous};
  const auto att = attention_(g, state.lstm.h, enc.keys, state.weights);
  Var input = ad::concat_cols({embedding_(g, ids), att.context});
  const auto lstm = decoder_.step(g, input, state.lstm);
  return {{lstm, att.weights}, lstm.h, output_(g, lstm.h)};
}

TeacherForced AsrModel::teacher_force(Graph& g, const Tensor& frames,
                                      std::span<const TokenId> targets) const {
  if (targets.empty() || targets.back() != Vocabulary::kEos) {
    throw std::invalid_argument("asr: teacher-forcing targets must end with <eos>");
  }
  for (TokenId t : targets) {
    if (t < 0 || static_cast<std::size_t>(t) >= config_.vocab_size || t == Vocabulary::kSos) {
      throw std::invalid_argument("asr: invalid target id " + std::to_string(t));
    }
  }
  const Encoded enc = encode(g, frames);
  const std::size_t L = targets.size();
  std::vector<int> inputs(L);
  inputs[0] = Vocabulary::kSos;
  for (std::size_t l = 1; l < L; ++l) inputs[l] = targets[l - 1];

  // The embedding half of the decoder input projection is computed for all steps at once.
  const std::size_t E = config_.embedding_dim;
  Var w_x = g.param(decoder_.input_weight());
  Var w_embed = g.slice_rows(w_x, 0, E);
  Var w_context = g.slice_rows(w_x, E, w_x.rows());
  Var embed_proj = ad::add_row(ad::matmul(embedding_(g, inputs), w_embed), g.param(decoder_.bias()));

  DecoderState state = initial_state(g, enc);
  std::vector<Var> outputs;
  outputs.reserve(L);
  for (std::size_t l = 0; l < L; ++l) {
    const auto att = attention_(g, state.lstm.h, enc.keys, state.weights);
    Var z = (L == 1 ? embed_proj : g.slice_rows(embed_proj, l, l + 1)) +
            ad::matmul(att.context, w_context);
    state = {decoder_.step_projected(g, z, state.lstm), att.weights};
    outputs.push_back(state.lstm.h);
  }
  Var features = L == 1 ? outputs.front() : ad::concat_rows(outputs);
  Var logits = output_(g, features);
  std::vector<int> tgt(targets.begin(), targets.end());
  Var loss = g.cross_entropy(logits, tgt, ad::Reduction::kSum);
  return {loss, features, logits, L};
}

std::size_t AsrModel::default_max_len(std::size_t frames) const {
  return std::min<std::size_t>(200, std::max<std::size_t>(1, 2 * encoder_.output_length(frames)));
}

Hypothesis AsrModel::greedy_decode(const Tensor& frames, std::size_t max_len) const {
  AsrScorer scorer(*this, frames);
  return greedy_search(scorer, max_len == 0 ? default_max_len(frames.rows()) : max_len);
}

std::vector<Hypothesis> AsrModel::beam_decode(const Tensor& frames, BeamOptions options) const {
  if (options.max_len == 0) options.max_len = default_max_len(frames.rows());
  AsrScorer scorer(*this, frames);
  return beam_search(scorer, options);
}

AsrScorer::AsrScorer(const AsrModel& model, const Tensor& frames)
    : model_(model), encoded_(model.encode(graph_, frames)) {}

AsrScorer::State AsrScorer::initial_state() { return model_.initial_state(graph_, encoded_); }

ScoredStep<AsrScorer::State> AsrScorer::step(const State& state, TokenId previous) {
  auto s = model_.decode_step(graph_, encoded_, state, previous);
  const auto& o = s.output.value().vector();
  return {s.state, ad::log_softmax(s.logits.value().data()), o};
}

BatchLoss asr_batch_loss(Graph& g, const AsrModel& model, std::span<const Tensor* const> frames,
                         std::span<const std::vector<TokenId>* const> targets) {
  if (frames.empty()) throw std::invalid_argument("asr: empty batch");
  if (frames.size() != targets.size()) throw std::invalid_argument("asr: batch size mismatch");
  BatchLoss out;
  std::vector<Var> sums;
  for (std::size_t b = 0; b < frames.size(); ++b) {
    out.items.push_back(model.teacher_force(g, *frames[b], *targets[b]));
    sums.push_back(out.items.back().loss_sum);
    out.tokens += out.items.back().tokens;
  }
  Var total = sums.size() == 1 ? sums.front() : ad::sum(ad::concat_rows(sums));
  out.loss = ad::scale(total, 1.0 / static_cast<double>(out.tokens));
  return out;
}

}  // namespace s2da::asr
