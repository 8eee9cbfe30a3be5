#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"
#include "s2da/data/synthetic.hpp"
#include "s2da/metrics/metrics.hpp"
#include "s2da/unified/segmenter.hpp"
#include "s2da/unified/training.hpp"

namespace s2da::unified {

/// Segment-level comparison of DA classifiers on recognized speech: a
/// word-embedding classifier trained on gold text and applied to 1-best
/// transcripts, against a classifier reading decoder outputs.
struct ExperimentAConfig {
  data::SyntheticSpec data;
  ModelConfig model;
  TrainingConfig asr;
  TrainingConfig da;
  std::vector<std::uint64_t> seeds{1, 2, 3};

  ExperimentAConfig();
};

struct ExperimentARun {
  std::uint64_t seed = 0;
  double wer = 0;
  double text_ler = 0;
  double feature_ler = 0;
};

struct ExperimentAResult {
  std::vector<ExperimentARun> runs;
  double mean_wer = 0;
  double mean_text_ler = 0;
  double mean_feature_ler = 0;
  double seconds = 0;
};

ExperimentAResult run_experiment_a(const ExperimentAConfig& config, const TrainingLog& log = {});
nlohmann::json to_json(const ExperimentAResult& r);

/// Turn-level segmentation: an ASR model emitting <da_end> against a plain
/// ASR model followed by a text segmenter.
struct ExperimentBConfig {
  data::SyntheticSpec data;
  ModelConfig model;
  TrainingConfig asr;
  SegmenterConfig segmenter;
  TrainingConfig segmenter_training;
  std::vector<std::uint64_t> seeds{1, 2, 3};

  ExperimentBConfig();
};

struct ExperimentBRun {
  std::uint64_t seed = 0;
  metrics::MetricReport joint;
  metrics::MetricReport text;
};

struct ExperimentBResult {
  std::vector<ExperimentBRun> runs;
  double mean_joint_ser = 0;
  double mean_text_ser = 0;
  double seconds = 0;
};

ExperimentBResult run_experiment_b(const ExperimentBConfig& config, const TrainingLog& log = {});
nlohmann::json to_json(const ExperimentBResult& r);

/// Joint training on a handful of turns until every metric on those turns is zero.
struct OverfitConfig {
  std::size_t turns = 10;
  std::size_t max_steps = 500;
  std::size_t check_every = 10;
  std::uint64_t seed = 1;
};

struct OverfitResult {
  std::size_t steps = 0;
  metrics::MetricReport report;
  bool reached = false;
};

OverfitResult run_overfit(const OverfitConfig& config);

/// Small end-to-end run: synthesize, train step-wise, evaluate the test split.
metrics::MetricReport run_pipeline(std::uint64_t seed);

}  // namespace s2da::unified
