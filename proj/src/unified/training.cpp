#include "s2da/unified/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "s2da/autodiff/optimizer.hpp"
#include "s2da/unified/recognize.hpp"

namespace s2da::unified {

using ad::Graph;
using ad::Var;

void TrainingConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("training config: " + m); };
  if (!(lambda >= 0.0 && lambda <= 1.0)) fail("lambda must lie in [0, 1]");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (batch_size < 1) fail("batch_size must be at least 1");
  if (!(clip_norm > 0.0)) fail("clip_norm must be positive");
}

nlohmann::json to_json(const TrainingConfig& c) {
  return {{"lambda", c.lambda},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"clip_norm", c.clip_norm},
          {"bucketing", c.bucketing},
          {"feature_source", c.feature_source == FeatureSource::kDecoded ? "decoded" : "teacher_forced"}};
}

TrainingConfig training_config_from_json(const nlohmann::json& j, TrainingConfig c) {
  c.lambda = j.value("lambda", c.lambda);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.bucketing = j.value("bucketing", c.bucketing);
  if (j.contains("feature_source")) {
    const auto s = j.at("feature_source").get<std::string>();
    if (s == "decoded") {
      c.feature_source = FeatureSource::kDecoded;
    } else if (s == "teacher_forced") {
      c.feature_source = FeatureSource::kTeacherForced;
    } else {
      throw std::invalid_argument("training config: feature_source must be decoded or teacher_forced");
    }
  }
  c.validate();
  return c;
}

Var joint_loss(Var asr_loss, Var da_loss, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("joint_loss: lambda must lie in [0, 1]");
  return ad::scale(da_loss, lambda) + ad::scale(asr_loss, 1.0 - lambda);
}

double joint_loss(double asr_loss, double da_loss, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("joint_loss: lambda must lie in [0, 1]");
  return lambda * da_loss + (1.0 - lambda) * asr_loss;
}

namespace {

std::vector<const data::Utterance*> flatten(const std::vector<data::ConversationUnits>& units) {
  std::vector<const data::Utterance*> out;
  for (const auto& c : units) {
    for (const auto& u : c) out.push_back(&u);
  }
  return out;
}

/// Freezes one prefix for the lifetime of the guard.
class FreezeGuard {
 public:
  FreezeGuard(ad::ParameterStore& store, std::string prefix) : store_(store), prefix_(std::move(prefix)) {
    store_.set_frozen(prefix_, true);
  }
  ~FreezeGuard() { store_.set_frozen(prefix_, false); }
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  ad::ParameterStore& store_;
  std::string prefix_;
};

/// Backward, clip, and update; rethrows numeric failures with the step index.
void update(Graph& g, Var loss, ad::ParameterStore& store, ad::Adam& adam, double clip,
            std::size_t step) {
  if (!std::isfinite(loss.value()[0])) {
    throw ad::NumericError("non-finite loss at training step " + std::to_string(step));
  }
  store.zero_grad();
  try {
    g.backward(loss);
    ad::clip_grad_norm(store, clip);
    adam.step(store);
  } catch (const ad::NumericError& e) {
    throw ad::NumericError("training step " + std::to_string(step) + ": " + e.what());
  }
}

/// Positions of word tokens (not <eos> or <da_end>) inside a target sequence.
std::vector<std::size_t> word_positions(std::span<const TokenId> targets) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] != Vocabulary::kEos && targets[i] != Vocabulary::kDaEnd) out.push_back(i);
  }
  return out;
}

std::vector<da::SegmentInput> inputs_for(Graph& g, const da::DaModel& model, const DaConversation& conv) {
  const bool need_features = model.config().mode != da::InputMode::kWordEmbedding;
  std::vector<da::SegmentInput> in;
  for (const auto& s : conv) {
    if (need_features && s.features.empty()) {
      throw std::invalid_argument("da training: this input mode needs ASR features");
    }
    in.push_back({s.words, need_features ? g.constant(s.features) : Var{}});
  }
  return in;
}

}  // namespace

double asr_loss(const UnifiedModel& model, const std::vector<data::ConversationUnits>& units) {
  double total = 0, tokens = 0;
  for (const auto& conv : units) {
    for (const auto& u : conv) {
      Graph g;
      const auto tf = model.asr().teacher_force(g, u.frames, u.targets);
      total += tf.loss_sum.value()[0];
      tokens += static_cast<double>(tf.tokens);
    }
  }
  if (tokens == 0) throw std::invalid_argument("asr_loss: no units");
  return total / tokens;
}

TrainingHistory train_asr(UnifiedModel& model, const std::vector<data::ConversationUnits>& units,
                          const TrainingConfig& config, const TrainingLog& log,
                          const std::vector<data::ConversationUnits>* validation) {
  config.validate();
  const auto items = flatten(units);
  if (items.empty()) throw std::invalid_argument("train_asr: no training units");
  if (validation && flatten(*validation).empty()) validation = nullptr;
  std::vector<std::size_t> lengths;
  for (const auto* u : items) lengths.push_back(u->frames.rows());
  data::BatchIterator batches(lengths, config.batch_size, config.seed, config.bucketing);
  FreezeGuard freeze(model.store(), "da.");
  ad::Adam adam(ad::AdamOptions{config.learning_rate});
  std::vector<std::pair<ad::Parameter*, ad::Tensor>> best;
  TrainingHistory hist;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double total = 0, tokens = 0;
    for (const auto& idx : batches.epoch(epoch)) {
      std::vector<const ad::Tensor*> f;
      std::vector<const std::vector<TokenId>*> t;
      for (std::size_t i : idx) {
        f.push_back(&items[i]->frames);
        t.push_back(&items[i]->targets);
      }
      Graph g;
      const auto batch = asr::asr_batch_loss(g, model.asr(), f, t);
      update(g, batch.loss, model.store(), adam, config.clip_norm, hist.steps++);
      total += batch.loss.value()[0] * static_cast<double>(batch.tokens);
      tokens += static_cast<double>(batch.tokens);
    }
    hist.epoch_loss.push_back(total / tokens);
    nlohmann::json entry{{"phase", "asr"}, {"epoch", epoch}, {"loss", hist.epoch_loss.back()}, {"steps", hist.steps}};
    if (validation) {
      hist.validation_loss.push_back(asr_loss(model, *validation));
      entry["validation_loss"] = hist.validation_loss.back();
      if (epoch == 0 || hist.validation_loss.back() < hist.validation_loss[hist.best_epoch]) {
        hist.best_epoch = epoch;
        best.clear();
        for (ad::Parameter* p : model.store().all()) {
          if (p->name.rfind("asr.", 0) == 0) best.emplace_back(p, p->value);
        }
      }
    }
    if (log) log(entry);
  }
  if (validation) {
    for (auto& [p, value] : best) p->value = value;
  } else {
    hist.best_epoch = config.epochs == 0 ? 0 : config.epochs - 1;
  }
  return hist;
}

std::vector<DaConversation> teacher_forced_segments(const UnifiedModel& model,
                                                    const std::vector<data::ConversationUnits>& units) {
  std::vector<DaConversation> out;
  for (const auto& conv : units) {
    DaConversation c;
    for (const auto& u : conv) {
      Graph g;
      const auto tf = model.asr().teacher_force(g, u.frames, u.targets);
      const auto& feats = tf.features.value();
      const auto pos = word_positions(u.targets);
      for (const auto& seg : u.segments) {
        DaSegmentData d;
        d.tag = seg.tag;
        d.features = ad::Tensor::zeros(seg.end - seg.begin, feats.cols());
        for (std::size_t i = seg.begin; i < seg.end; ++i) {
          d.words.push_back(u.targets[pos[i]]);
          const auto row = feats.row_span(pos[i]);
          std::copy(row.begin(), row.end(), d.features.row_span(i - seg.begin).begin());
        }
        c.push_back(std::move(d));
      }
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<DaConversation> decoded_segments(const UnifiedModel& model,
                                             const std::vector<data::ConversationUnits>& units) {
  std::vector<DaConversation> out;
  for (const auto& conv : units) {
    DaConversation c;
    for (const auto& u : conv) {
      const bool marked = std::find(u.targets.begin(), u.targets.end(), Vocabulary::kDaEnd) != u.targets.end();
      const auto hyp = model.asr().greedy_decode(u.frames);
      const auto split = marked ? split_at_boundaries(hyp) : whole_hypothesis(hyp);
      if (split.segments.size() != u.segments.size()) continue;
      for (std::size_t k = 0; k < u.segments.size(); ++k) {
        c.push_back({split.segments[k].tokens, split.segments[k].features, u.segments[k].tag});
      }
    }
    if (!c.empty()) out.push_back(std::move(c));
  }
  return out;
}

std::vector<DaConversation> gold_text_segments(const std::vector<data::ConversationUnits>& units) {
  std::vector<DaConversation> out;
  for (const auto& conv : units) {
    DaConversation c;
    for (const auto& u : conv) {
      const auto words = u.words();
      for (const auto& seg : u.segments) {
        c.push_back({{words.begin() + static_cast<std::ptrdiff_t>(seg.begin),
                      words.begin() + static_cast<std::ptrdiff_t>(seg.end)},
                     {},
                     seg.tag});
      }
    }
    out.push_back(std::move(c));
  }
  return out;
}

Var da_batch_loss(Graph& g, const da::DaModel& model, std::span<const DaConversation* const> conversations) {
  std::vector<Var> parts;
  std::size_t count = 0;
  for (const DaConversation* conv : conversations) {
    if (conv->empty()) continue;
    std::vector<TagId> tags;
    for (const auto& s : *conv) tags.push_back(s.tag);
    const auto in = inputs_for(g, model, *conv);
    parts.push_back(ad::scale(model.conversation_loss(g, in, tags), static_cast<double>(conv->size())));
    count += conv->size();
  }
  if (parts.empty()) throw std::invalid_argument("da: empty batch");
  Var total = parts.size() == 1 ? parts.front() : ad::sum(ad::concat_rows(parts));
  return ad::scale(total, 1.0 / static_cast<double>(count));
}

TrainingHistory train_da(UnifiedModel& model, const std::vector<DaConversation>& data,
                         const TrainingConfig& config, const TrainingLog& log) {
  config.validate();
  if (data.empty()) throw std::invalid_argument("train_da: no training conversations");
  std::vector<std::size_t> lengths;
  for (const auto& c : data) lengths.push_back(c.size());
  data::BatchIterator batches(lengths, config.batch_size, config.seed, config.bucketing);
  FreezeGuard freeze(model.store(), "asr.");
  ad::Adam adam(ad::AdamOptions{config.learning_rate});
  TrainingHistory hist;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double total = 0, count = 0;
    for (const auto& idx : batches.epoch(epoch)) {
      std::vector<const DaConversation*> batch;
      double n = 0;
      for (std::size_t i : idx) {
        batch.push_back(&data[i]);
        n += static_cast<double>(data[i].size());
      }
      if (n == 0) continue;
      Graph g;
      const Var loss = da_batch_loss(g, model.da(), batch);
      update(g, loss, model.store(), adam, config.clip_norm, hist.steps++);
      total += loss.value()[0] * n;
      count += n;
    }
    hist.epoch_loss.push_back(total / count);
    if (log) log({{"phase", "da"}, {"epoch", epoch}, {"loss", hist.epoch_loss.back()}, {"steps", hist.steps}});
  }
  return hist;
}

void train_stepwise(UnifiedModel& model, const std::vector<data::ConversationUnits>& units,
                    const StepwiseConfig& config, const TrainingLog& log,
                    const std::vector<data::ConversationUnits>* validation) {
  train_asr(model, units, config.asr, log, validation);
  std::vector<DaConversation> data;
  if (model.config().da.mode == da::InputMode::kWordEmbedding) {
    data = gold_text_segments(units);
  } else if (config.da.feature_source == FeatureSource::kDecoded) {
    data = decoded_segments(model, units);
  } else {
    data = teacher_forced_segments(model, units);
  }
  train_da(model, data, config.da, log);
}

JointLosses joint_batch_loss(Graph& g, const UnifiedModel& model,
                             std::span<const data::ConversationUnits* const> conversations,
                             double lambda) {
  std::vector<Var> asr_parts, da_parts;
  std::size_t tokens = 0, segments = 0;
  const bool need_features = model.config().da.mode != da::InputMode::kWordEmbedding;
  for (const auto* conv : conversations) {
    std::vector<da::SegmentInput> inputs;
    std::vector<TagId> tags;
    for (const auto& u : *conv) {
      const auto tf = model.asr().teacher_force(g, u.frames, u.targets);
      asr_parts.push_back(tf.loss_sum);
      tokens += tf.tokens;
      const auto pos = word_positions(u.targets);
      for (const auto& seg : u.segments) {
        da::SegmentInput in;
        std::vector<std::size_t> rows;
        for (std::size_t i = seg.begin; i < seg.end; ++i) {
          in.words.push_back(u.targets[pos[i]]);
          rows.push_back(pos[i]);
        }
        if (need_features) in.features = g.select_rows(tf.features, rows);
        inputs.push_back(std::move(in));
        tags.push_back(seg.tag);
      }
    }
    if (inputs.empty()) continue;
    da_parts.push_back(ad::scale(model.da().conversation_loss(g, inputs, tags),
                                 static_cast<double>(inputs.size())));
    segments += inputs.size();
  }
  if (asr_parts.empty() || da_parts.empty()) throw std::invalid_argument("joint: empty batch");
  auto total = [](const std::vector<Var>& v) { return v.size() == 1 ? v.front() : ad::sum(ad::concat_rows(v)); };
  JointLosses out;
  out.asr = ad::scale(total(asr_parts), 1.0 / static_cast<double>(tokens));
  out.da = ad::scale(total(da_parts), 1.0 / static_cast<double>(segments));
  out.total = joint_loss(out.asr, out.da, lambda);
  return out;
}

TrainingHistory train_joint(UnifiedModel& model, const std::vector<data::ConversationUnits>& units,
                            const TrainingConfig& config, const TrainingLog& log) {
  config.validate();
  if (units.empty()) throw std::invalid_argument("train_joint: no training conversations");
  std::vector<std::size_t> lengths;
  for (const auto& c : units) lengths.push_back(c.size());
  data::BatchIterator batches(lengths, config.batch_size, config.seed, config.bucketing);
  ad::Adam adam(ad::AdamOptions{config.learning_rate});
  TrainingHistory hist;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double total = 0, asr_total = 0, da_total = 0;
    std::size_t n = 0;
    for (const auto& idx : batches.epoch(epoch)) {
      std::vector<const data::ConversationUnits*> batch;
      for (std::size_t i : idx) batch.push_back(&units[i]);
      Graph g;
      JointLosses losses;
      try {
        losses = joint_batch_loss(g, model, batch, config.lambda);
      } catch (const ad::NumericError& e) {
        throw ad::NumericError("training step " + std::to_string(hist.steps) + ": " + e.what());
      }
      update(g, losses.total, model.store(), adam, config.clip_norm, hist.steps++);
      total += losses.total.value()[0];
      asr_total += losses.asr.value()[0];
      da_total += losses.da.value()[0];
      ++n;
    }
    const double dn = static_cast<double>(n);
    hist.epoch_loss.push_back(total / dn);
    if (log) {
      log({{"phase", "joint"}, {"epoch", epoch}, {"loss", total / dn}, {"asr_loss", asr_total / dn},
           {"da_loss", da_total / dn}, {"steps", hist.steps}});
    }
  }
  return hist;
}

Var asr_padded_batch_loss(Graph& g, const asr::AsrModel& model, const data::PaddedBatch& batch) {
  std::vector<ad::Tensor> frames;
  std::vector<std::vector<TokenId>> targets;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    frames.push_back(batch.unpadded_frames(b));
    targets.push_back(batch.unpadded_targets(b));
  }
  std::vector<const ad::Tensor*> f;
  std::vector<const std::vector<TokenId>*> t;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    f.push_back(&frames[b]);
    t.push_back(&targets[b]);
  }
  return asr::asr_batch_loss(g, model, f, t).loss;
}

}  // namespace s2da::unified
