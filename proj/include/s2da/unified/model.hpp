#pragma once

#include <filesystem>
#include <memory>

#include "json.hpp"
#include "s2da/asr/model.hpp"
#include "s2da/da/model.hpp"

namespace s2da::unified {

struct ModelConfig {
  asr::AsrConfig asr;
  da::DaConfig da;
  std::uint64_t seed = 1;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// ASR and DA submodels sharing one parameter store (prefixes "asr" and
/// "da"), together with the symbol tables they were built for.
class UnifiedModel {
 public:
  /// Fills vocabulary and tag sizes, and the DA feature width, from the arguments.
  UnifiedModel(ModelConfig config, Vocabulary vocab, TagSet tags);

  ad::ParameterStore& store() { return *store_; }
  const ad::ParameterStore& store() const { return *store_; }
  const asr::AsrModel& asr() const { return *asr_; }
  const da::DaModel& da() const { return *da_; }
  const Vocabulary& vocab() const { return vocab_; }
  const TagSet& tags() const { return tags_; }
  const ModelConfig& config() const { return config_; }

  void save(const std::filesystem::path& path) const;
  static UnifiedModel load(const std::filesystem::path& path);

 private:
  ModelConfig config_;
  Vocabulary vocab_;
  TagSet tags_;
  std::unique_ptr<ad::ParameterStore> store_;
  std::unique_ptr<asr::AsrModel> asr_;
  std::unique_ptr<da::DaModel> da_;
};

/// Copies every parameter under `prefix` from one store to another.
void copy_parameters(const ad::ParameterStore& from, ad::ParameterStore& to, const std::string& prefix);

}  // namespace s2da::unified
