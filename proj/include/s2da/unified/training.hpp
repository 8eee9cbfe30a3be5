#pragma once

#include <functional>
#include <vector>

#include "json.hpp"
#include "s2da/data/batching.hpp"
#include "s2da/unified/model.hpp"

namespace s2da::unified {

/// Where the DA model's ASR features come from during step-wise training.
enum class FeatureSource { kDecoded, kTeacherForced };

struct TrainingConfig {
  double lambda = 0.1;
  double learning_rate = 1e-3;
  std::size_t batch_size = 8;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  double clip_norm = 5.0;
  bool bucketing = true;
  FeatureSource feature_source = FeatureSource::kDecoded;

  void validate() const;
};

nlohmann::json to_json(const TrainingConfig& c);
TrainingConfig training_config_from_json(const nlohmann::json& j, TrainingConfig defaults = {});

/// Receives one JSON object per epoch (and per log event).
using TrainingLog = std::function<void(const nlohmann::json&)>;

/// L = lambda * L_DA + (1 - lambda) * L_ASR.
ad::Var joint_loss(ad::Var asr_loss, ad::Var da_loss, double lambda);
double joint_loss(double asr_loss, double da_loss, double lambda);

/// Mean per-epoch losses.
struct TrainingHistory {
  std::vector<double> epoch_loss;
  std::vector<double> validation_loss;
  std::size_t best_epoch = 0;
  std::size_t steps = 0;
};

/// Mean per-token teacher-forced ASR loss over every unit.
double asr_loss(const UnifiedModel& model, const std::vector<data::ConversationUnits>& units);

/// Trains the ASR submodel alone on every unit; DA parameters are untouched.
/// With validation units, the ASR parameters of the epoch with the lowest
/// validation loss are restored at the end.
TrainingHistory train_asr(UnifiedModel& model, const std::vector<data::ConversationUnits>& units,
                          const TrainingConfig& config, const TrainingLog& log = {},
                          const std::vector<data::ConversationUnits>* validation = nullptr);

/// One DA training example with its input already resolved.
struct DaSegmentData {
  std::vector<TokenId> words;
  ad::Tensor features;  // [words, feature_dim]; empty in word-embedding mode
  TagId tag = 0;
};
using DaConversation = std::vector<DaSegmentData>;

/// Gold words with teacher-forced ASR features.
std::vector<DaConversation> teacher_forced_segments(const UnifiedModel& model,
                                                    const std::vector<data::ConversationUnits>& units);
/// Segments as decoded by greedy search: for segment units the whole
/// transcript, for turn units the spans between boundary symbols. Decoded
/// turns whose segment count differs from gold are skipped.
std::vector<DaConversation> decoded_segments(const UnifiedModel& model,
                                             const std::vector<data::ConversationUnits>& units);
/// Gold words only.
std::vector<DaConversation> gold_text_segments(const std::vector<data::ConversationUnits>& units);

/// Mean cross-entropy over every segment of the given conversations.
ad::Var da_batch_loss(ad::Graph& g, const da::DaModel& model,
                      std::span<const DaConversation* const> conversations);

/// Trains the DA submodel with the ASR submodel frozen.
TrainingHistory train_da(UnifiedModel& model, const std::vector<DaConversation>& data,
                         const TrainingConfig& config, const TrainingLog& log = {});

/// ASR training followed by DA training on features from the frozen ASR.
struct StepwiseConfig {
  TrainingConfig asr;
  TrainingConfig da;
};
void train_stepwise(UnifiedModel& model, const std::vector<data::ConversationUnits>& units,
                    const StepwiseConfig& config, const TrainingLog& log = {},
                    const std::vector<data::ConversationUnits>* validation = nullptr);

/// Both losses of one teacher-forced pass over a set of conversations; the DA
/// loss reads the teacher-forced decoder outputs, so its gradient reaches
/// the ASR parameters.
struct JointLosses {
  ad::Var asr;
  ad::Var da;
  ad::Var total;
};
JointLosses joint_batch_loss(ad::Graph& g, const UnifiedModel& model,
                             std::span<const data::ConversationUnits* const> conversations,
                             double lambda);

/// End-to-end fine-tuning of all parameters against the joint loss. Throws
/// ad::NumericError naming the step when the loss is not finite.
TrainingHistory train_joint(UnifiedModel& model, const std::vector<data::ConversationUnits>& units,
                            const TrainingConfig& config, const TrainingLog& log = {});

/// Padded-batch spelling of the ASR loss: padding is read through the masks only.
ad::Var asr_padded_batch_loss(ad::Graph& g, const asr::AsrModel& model,
                              const data::PaddedBatch& batch);

}  // namespace s2da::unified
