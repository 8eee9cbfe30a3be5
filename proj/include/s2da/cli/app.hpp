#pragma once

#include <ostream>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "s2da/data/utterances.hpp"
#include "s2da/unified/recognize.hpp"
#include "s2da/unified/training.hpp"

namespace s2da::cli {

/// A configuration that does not match the expected structure.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Everything a training run needs besides the corpus.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  data::UnitKind units = data::UnitKind::kTurnWithBoundaries;
  /// "asr", "stepwise", "joint" or "stepwise+joint".
  std::string schedule = "stepwise+joint";
  unified::ModelConfig model;
  unified::TrainingConfig asr_training;
  unified::TrainingConfig da_training;
  unified::TrainingConfig joint_training;
  unified::RecognizeOptions decode;

  void validate() const;
};

/// Strict: unknown keys and wrongly typed values raise ConfigError. The seed
/// is copied into the model and every training stage.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);

std::string to_string(data::UnitKind kind);
data::UnitKind parse_unit_kind(const std::string& name);

/// Runs the command line; returns 0 on success, 1 on runtime failure, 2 on usage errors.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace s2da::cli
