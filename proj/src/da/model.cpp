#include "s2da/da/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace s2da::da {

std::string to_string(InputMode mode) {
  switch (mode) {
    case InputMode::kWordEmbedding:
      return "embed";
    case InputMode::kAsrFeature:
      return "asrfeat";
    case InputMode::kHybrid:
      return "hybrid";
  }
  return "embed";
}

InputMode parse_input_mode(const std::string& name) {
  if (name == "embed") return InputMode::kWordEmbedding;
  if (name == "asrfeat") return InputMode::kAsrFeature;
  if (name == "hybrid") return InputMode::kHybrid;
  throw std::invalid_argument("unknown DA input mode '" + name + "' (expected embed, asrfeat or hybrid)");
}

void DaConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("da config: " + m); };
  if (num_tags < 1) fail("empty tag set");
  if (mode != InputMode::kAsrFeature && vocab_size < 1) fail("vocab_size must be positive");
  if (embedding_dim < 1 || feature_dim < 1) fail("input widths must be positive");
  if (word_hidden < 1 || word_layers < 1 || utterance_hidden < 1) fail("encoder sizes must be positive");
  if (history < 1) fail("history length must be at least 1");
}

nlohmann::json to_json(const DaConfig& c) {
  return {{"mode", to_string(c.mode)},         {"vocab_size", c.vocab_size},
          {"num_tags", c.num_tags},            {"embedding_dim", c.embedding_dim},
          {"feature_dim", c.feature_dim},      {"word_hidden", c.word_hidden},
          {"word_layers", c.word_layers},      {"utterance_hidden", c.utterance_hidden},
          {"history", c.history}};
}

DaConfig da_config_from_json(const nlohmann::json& j) {
  DaConfig c;
  c.mode = parse_input_mode(j.value("mode", to_string(c.mode)));
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.num_tags = j.value("num_tags", c.num_tags);
  c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
  c.feature_dim = j.value("feature_dim", c.feature_dim);
  c.word_hidden = j.value("word_hidden", c.word_hidden);
  c.word_layers = j.value("word_layers", c.word_layers);
  c.utterance_hidden = j.value("utterance_hidden", c.utterance_hidden);
  c.history = j.value("history", c.history);
  return c;
}

DialogContext::DialogContext(std::size_t history) : history_(history) {
  if (history_ < 1) throw std::invalid_argument("dialog context: history must be at least 1");
}

void DialogContext::push(Var encoding) {
  ring_.push_back(encoding);
  while (ring_.size() > history_) ring_.pop_front();
}

TagId argmax_tag(std::span<const double> probs) {
  if (probs.empty()) throw std::invalid_argument("argmax over an empty distribution");
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return static_cast<TagId>(best);
}

DaModel::DaModel(ParameterStore& store, const DaConfig& config, const std::string& prefix)
    : config_(config), prefix_(prefix) {
  config_.validate();
  const bool words = config_.mode != InputMode::kAsrFeature;
  const bool features = config_.mode != InputMode::kWordEmbedding;
  std::size_t input = config_.embedding_dim;
  if (words) embedding_ = nn::Embedding(store, prefix + ".embedding", config_.vocab_size, config_.embedding_dim);
  if (features) {
    if (config_.mode == InputMode::kAsrFeature) {
      input = config_.feature_dim;
    } else if (config_.feature_dim != config_.embedding_dim) {
      feature_projection_ = nn::Dense(store, prefix + ".feature_projection", config_.feature_dim,
                                      config_.embedding_dim, false);
      project_features_ = true;
    }
  }
  word_encoder_ = nn::BiLstmEncoder(store, prefix + ".word_encoder", input, config_.word_hidden,
                                    config_.word_layers, {});
  utterance_encoder_ = nn::LstmCell(store, prefix + ".utterance_encoder", 2 * config_.word_hidden,
                                    config_.utterance_hidden);
  initial_h_ = &store.add(prefix + ".utterance_encoder.h0", ad::Shape{1, config_.utterance_hidden},
                          ad::Init::kZeros);
  initial_c_ = &store.add(prefix + ".utterance_encoder.c0", ad::Shape{1, config_.utterance_hidden},
                          ad::Init::kZeros);
  output_ = nn::Dense(store, prefix + ".output", config_.utterance_hidden, config_.num_tags);
}

Var DaModel::encode_segment(Graph& g, const SegmentInput& input) const {
  Var x;
  const bool words = config_.mode != InputMode::kAsrFeature;
  const bool features = config_.mode != InputMode::kWordEmbedding;
  if (words && input.words.empty()) throw std::invalid_argument("da: empty segment");
  if (features) {
    if (!input.features.valid()) throw std::invalid_argument("da: ASR features required in this mode");
    if (input.features.cols() != config_.feature_dim) {
      throw ad::ShapeError("da: ASR feature width " + std::to_string(input.features.cols()) +
                           " does not match " + std::to_string(config_.feature_dim));
    }
    if (words && input.features.rows() != input.words.size()) {
      throw std::invalid_argument("da: hybrid mode needs one ASR feature per word");
    }
  }
  switch (config_.mode) {
    case InputMode::kWordEmbedding:
      x = embedding_(g, input.words);
      break;
    case InputMode::kAsrFeature:
      x = input.features;
      break;
    case InputMode::kHybrid: {
      Var o = project_features_ ? feature_projection_(g, input.features) : input.features;
      x = o + embedding_(g, input.words);
      break;
    }
  }
  const auto state = word_encoder_(g, x);
  const std::size_t H = config_.word_hidden, T = state.length();
  Var last = T == 1 ? state.hidden : g.slice_rows(state.hidden, T - 1, T);
  Var first = T == 1 ? state.hidden : g.slice_rows(state.hidden, 0, 1);
  return ad::concat_cols({g.slice_cols(last, 0, H), g.slice_cols(first, H, 2 * H)});
}

Var DaModel::logits(Graph& g, std::span<const Var> window) const {
  if (window.empty()) throw std::invalid_argument("da: empty context window");
  if (window.size() > config_.history) throw std::invalid_argument("da: context window exceeds history");
  nn::LstmState s{g.param(*initial_h_), g.param(*initial_c_)};
  for (const Var& enc : window) s = utterance_encoder_.step(g, enc, s);
  return output_(g, s.h);
}

Var DaModel::classify_logits(Graph& g, DialogContext& context, Var encoding) const {
  if (context.history() != config_.history) {
    throw std::invalid_argument("da: context history does not match the model");
  }
  context.push(encoding);
  const auto w = context.window();
  return logits(g, w);
}

TagDistribution DaModel::classify(Graph& g, DialogContext& context, Var encoding) const {
  const Var l = classify_logits(g, context, encoding);
  TagDistribution out;
  const auto lp = ad::log_softmax(l.value().data());
  for (double v : lp) out.probs.push_back(std::exp(v));
  out.predicted = argmax_tag(out.probs);
  return out;
}

Var DaModel::conversation_logits(Graph& g, std::span<const SegmentInput> segments) const {
  if (segments.empty()) throw std::invalid_argument("da: empty batch");
  DialogContext context(config_.history);
  std::vector<Var> rows;
  for (const auto& s : segments) rows.push_back(classify_logits(g, context, encode_segment(g, s)));
  return rows.size() == 1 ? rows.front() : ad::concat_rows(rows);
}

Var DaModel::conversation_loss(Graph& g, std::span<const SegmentInput> segments,
                               std::span<const TagId> tags) const {
  if (segments.size() != tags.size()) throw std::invalid_argument("da: one tag per segment required");
  for (TagId t : tags) {
    if (t < 0 || static_cast<std::size_t>(t) >= config_.num_tags) {
      throw std::invalid_argument("da: invalid tag id " + std::to_string(t));
    }
  }
  std::vector<int> targets(tags.begin(), tags.end());
  return g.cross_entropy(conversation_logits(g, segments), targets, ad::Reduction::kMean);
}

TagDistribution combine_nbest(std::span<const std::vector<double>> distributions,
                              std::span<const double> normalized_scores) {
  if (distributions.empty()) throw std::invalid_argument("n-best combination: no hypotheses");
  if (distributions.size() != normalized_scores.size()) {
    throw std::invalid_argument("n-best combination: one score per hypothesis required");
  }
  const double m = *std::max_element(normalized_scores.begin(), normalized_scores.end());
  std::vector<double> w;
  double z = 0;
  for (double s : normalized_scores) {
    w.push_back(std::exp(s - m));
    z += w.back();
  }
  TagDistribution out;
  out.probs.assign(distributions.front().size(), 0.0);
  for (std::size_t i = 0; i < distributions.size(); ++i) {
    if (distributions[i].size() != out.probs.size()) {
      throw std::invalid_argument("n-best combination: distributions differ in size");
    }
    for (std::size_t k = 0; k < out.probs.size(); ++k) out.probs[k] += w[i] / z * distributions[i][k];
  }
  out.predicted = argmax_tag(out.probs);
  return out;
}

}  // namespace s2da::da
