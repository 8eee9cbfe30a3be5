#include "s2da/unified/model.hpp"

#include "s2da/autodiff/checkpoint.hpp"

namespace s2da::unified {

nlohmann::json to_json(const ModelConfig& c) {
  return {{"asr", asr::to_json(c.asr)}, {"da", da::to_json(c.da)}, {"seed", c.seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  if (j.contains("asr")) c.asr = asr::asr_config_from_json(j.at("asr"));
  if (j.contains("da")) c.da = da::da_config_from_json(j.at("da"));
  c.seed = j.value("seed", c.seed);
  return c;
}

UnifiedModel::UnifiedModel(ModelConfig config, Vocabulary vocab, TagSet tags)
    : config_(std::move(config)), vocab_(std::move(vocab)), tags_(std::move(tags)) {
  config_.asr.vocab_size = vocab_.size();
  config_.da.vocab_size = vocab_.size();
  config_.da.num_tags = tags_.size();
  config_.da.feature_dim = config_.asr.decoder_hidden;
  store_ = std::make_unique<ad::ParameterStore>(config_.seed);
  asr_ = std::make_unique<asr::AsrModel>(*store_, config_.asr, "asr");
  da_ = std::make_unique<da::DaModel>(*store_, config_.da, "da");
}

void UnifiedModel::save(const std::filesystem::path& path) const {
  const nlohmann::json meta = {{"config", to_json(config_)},
                               {"vocabulary", vocab_.words()},
                               {"tags", tags_.tags()}};
  ad::save_checkpoint(path, *store_, meta.dump());
}

UnifiedModel UnifiedModel::load(const std::filesystem::path& path) {
  const auto ckpt = ad::load_checkpoint(path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(ckpt.metadata);
  } catch (const nlohmann::json::exception& e) {
    throw ad::CheckpointError("checkpoint metadata is not valid JSON: " + std::string(e.what()));
  }
  const auto words = meta.at("vocabulary").get<std::vector<std::string>>();
  const auto tags = meta.at("tags").get<std::vector<std::string>>();
  UnifiedModel model(model_config_from_json(meta.at("config")), Vocabulary::from_list(words),
                     TagSet::from_list(tags));
  ad::restore_parameters(ckpt, *model.store_);
  return model;
}

void copy_parameters(const ad::ParameterStore& from, ad::ParameterStore& to,
                     const std::string& prefix) {
  for (const ad::Parameter* p : from.all()) {
    if (p->name.rfind(prefix, 0) != 0) continue;
    auto& dst = to.get(p->name);
    if (!(dst.value.shape() == p->value.shape())) {
      throw ad::ShapeError("copy_parameters: shape mismatch for " + p->name);
    }
    dst.value = p->value;
  }
}

}  // namespace s2da::unified
