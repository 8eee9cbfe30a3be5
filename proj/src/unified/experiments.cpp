#include "s2da/unified/experiments.hpp"

#include <chrono>
#include <stdexcept>

#include "s2da/autodiff/optimizer.hpp"
#include "s2da/data/utterances.hpp"
#include "s2da/unified/recognize.hpp"

namespace s2da::unified {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

TrainingConfig reseeded(TrainingConfig c, std::uint64_t seed) {
  c.seed = seed;
  return c;
}

std::vector<std::string> word_strings(const Vocabulary& vocab, std::span<const TokenId> ids) {
  std::vector<std::string> out;
  for (TokenId t : ids) out.push_back(vocab.word(t));
  return out;
}

}  // namespace

ExperimentAConfig::ExperimentAConfig() {
  data.sigma = 1.7;
  model.da.history = 3;
  asr.epochs = 10;
  asr.learning_rate = 3e-3;
  da.epochs = 8;
  da.learning_rate = 3e-3;
}

ExperimentAResult run_experiment_a(const ExperimentAConfig& config, const TrainingLog& log) {
  if (config.seeds.empty()) throw std::invalid_argument("experiment A: no seeds");
  const auto t0 = Clock::now();
  ExperimentAResult result;
  for (std::uint64_t seed : config.seeds) {
    data::SyntheticSpec spec = config.data;
    spec.seed = seed;
    const auto synthetic = data::synthesize_corpus(spec);
    const auto& corpus = synthetic.corpus;
    const auto train = data::build_units(corpus, data::Split::kTrain, data::UnitKind::kSegment);
    const auto validation = data::build_units(corpus, data::Split::kValidation, data::UnitKind::kSegment);
    const auto test = data::build_units(corpus, data::Split::kTest, data::UnitKind::kSegment);

    ModelConfig mc = config.model;
    mc.seed = seed;
    mc.asr.feature_dim = spec.dim;
    mc.da.mode = da::InputMode::kWordEmbedding;
    UnifiedModel text(mc, corpus.vocab, corpus.tags);
    mc.da.mode = da::InputMode::kAsrFeature;
    UnifiedModel feature(mc, corpus.vocab, corpus.tags);

    train_asr(text, train, reseeded(config.asr, seed), log, &validation);
    copy_parameters(text.store(), feature.store(), "asr.");
    train_da(text, gold_text_segments(train), reseeded(config.da, seed), log);
    train_da(feature, decoded_segments(feature, train), reseeded(config.da, seed), log);

    RecognizeOptions options;
    options.segment_at_boundaries = false;
    const auto text_eval = evaluate(text, test, options);
    const auto feature_eval = evaluate(feature, test, options);
    ExperimentARun run;
    run.seed = seed;
    run.wer = text_eval.report.wer->percent();
    run.text_ler = text_eval.report.ler->percent();
    run.feature_ler = feature_eval.report.ler->percent();
    if (log) {
      log({{"phase", "experiment_a"}, {"seed", seed}, {"wer", run.wer}, {"text_ler", run.text_ler},
           {"feature_ler", run.feature_ler}});
    }
    result.runs.push_back(run);
  }
  const double n = static_cast<double>(result.runs.size());
  for (const auto& r : result.runs) {
    result.mean_wer += r.wer / n;
    result.mean_text_ler += r.text_ler / n;
    result.mean_feature_ler += r.feature_ler / n;
  }
  result.seconds = seconds_since(t0);
  return result;
}

nlohmann::json to_json(const ExperimentAResult& r) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& x : r.runs) {
    runs.push_back({{"seed", x.seed}, {"wer", x.wer}, {"text_ler", x.text_ler}, {"feature_ler", x.feature_ler}});
  }
  return {{"runs", runs},
          {"mean_wer", r.mean_wer},
          {"mean_text_ler", r.mean_text_ler},
          {"mean_feature_ler", r.mean_feature_ler},
          {"seconds", r.seconds}};
}

ExperimentBConfig::ExperimentBConfig() {
  data.sigma = 0.1;
  data.pause_frames = 3;
  asr.epochs = 12;
  asr.learning_rate = 3e-3;
  segmenter_training.epochs = 6;
  segmenter_training.learning_rate = 3e-3;
}

ExperimentBResult run_experiment_b(const ExperimentBConfig& config, const TrainingLog& log) {
  if (config.seeds.empty()) throw std::invalid_argument("experiment B: no seeds");
  const auto t0 = Clock::now();
  ExperimentBResult result;
  for (std::uint64_t seed : config.seeds) {
    data::SyntheticSpec spec = config.data;
    spec.seed = seed;
    const auto synthetic = data::synthesize_corpus(spec);
    const auto& corpus = synthetic.corpus;
    const auto marked_train = data::build_units(corpus, data::Split::kTrain, data::UnitKind::kTurnWithBoundaries);
    const auto plain_train = data::build_units(corpus, data::Split::kTrain, data::UnitKind::kTurn);
    const auto marked_validation =
        data::build_units(corpus, data::Split::kValidation, data::UnitKind::kTurnWithBoundaries);
    const auto plain_validation = data::build_units(corpus, data::Split::kValidation, data::UnitKind::kTurn);
    const auto test = data::build_units(corpus, data::Split::kTest, data::UnitKind::kTurn);

    ModelConfig mc = config.model;
    mc.seed = seed;
    mc.asr.feature_dim = spec.dim;
    UnifiedModel joint(mc, corpus.vocab, corpus.tags);
    UnifiedModel plain(mc, corpus.vocab, corpus.tags);
    train_asr(joint, marked_train, reseeded(config.asr, seed), log, &marked_validation);
    train_asr(plain, plain_train, reseeded(config.asr, seed), log, &plain_validation);

    ad::ParameterStore segmenter_store(seed);
    SegmenterConfig sc = config.segmenter;
    sc.vocab_size = corpus.vocab.size();
    TextSegmenter segmenter(segmenter_store, sc);
    train_segmenter(segmenter, segmenter_store, plain_train, reseeded(config.segmenter_training, seed), log);

    ExperimentBRun run;
    run.seed = seed;
    for (const auto& conv : test) {
      for (const auto& unit : conv) {
        const auto gold_ends = data::boundary_ends(unit.segments);
        const auto ref = word_strings(corpus.vocab, unit.words());

        const auto split = split_at_boundaries(joint.asr().greedy_decode(unit.frames));
        metrics::TaggedTurn hyp;
        std::vector<std::string> joint_words;
        for (const auto& s : split.segments) {
          metrics::TaggedSegment seg;
          if (!split.empty_transcript) seg.words = word_strings(corpus.vocab, s.tokens);
          joint_words.insert(joint_words.end(), seg.words.begin(), seg.words.end());
          hyp.push_back(std::move(seg));
        }
        auto joint_ends = metrics::boundaries_of(hyp);
        if (joint_ends.empty()) joint_ends.push_back(0);
        run.joint.add_wer(ref, joint_words);
        run.joint.add_ser(gold_ends, joint_ends, ref.size());
        run.joint.add_nser(gold_ends.size(), split.segments.size());

        const auto words = plain.asr().greedy_decode(unit.frames).body();
        const auto text_ends = segmenter.predict(words);
        run.text.add_wer(ref, word_strings(corpus.vocab, words));
        run.text.add_ser(gold_ends, text_ends, ref.size());
        run.text.add_nser(gold_ends.size(), text_ends.size());
      }
    }
    if (log) {
      log({{"phase", "experiment_b"}, {"seed", seed}, {"joint_ser", run.joint.ser->percent()},
           {"text_ser", run.text.ser->percent()}});
    }
    result.runs.push_back(std::move(run));
  }
  const double n = static_cast<double>(result.runs.size());
  for (const auto& r : result.runs) {
    result.mean_joint_ser += r.joint.ser->percent() / n;
    result.mean_text_ser += r.text.ser->percent() / n;
  }
  result.seconds = seconds_since(t0);
  return result;
}

nlohmann::json to_json(const ExperimentBResult& r) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& x : r.runs) {
    runs.push_back({{"seed", x.seed}, {"joint", metrics::to_json(x.joint)}, {"text", metrics::to_json(x.text)}});
  }
  return {{"runs", runs},
          {"mean_joint_ser", r.mean_joint_ser},
          {"mean_text_ser", r.mean_text_ser},
          {"seconds", r.seconds}};
}

OverfitResult run_overfit(const OverfitConfig& config) {
  data::SyntheticSpec spec;
  spec.seed = config.seed;
  spec.sigma = 0.1;
  spec.conversations = 4;
  spec.segments_per_conversation = 8;
  spec.validation_conversations = 1;
  spec.test_conversations = 1;
  const auto synthetic = data::synthesize_corpus(spec);
  const auto all = data::build_units(synthetic.corpus, data::Split::kTrain, data::UnitKind::kTurnWithBoundaries);

  std::vector<data::ConversationUnits> units;
  std::size_t taken = 0;
  for (const auto& conv : all) {
    data::ConversationUnits part;
    for (const auto& u : conv) {
      if (taken == config.turns) break;
      part.push_back(u);
      ++taken;
    }
    if (!part.empty()) units.push_back(std::move(part));
  }
  if (taken < config.turns) throw std::invalid_argument("overfit: corpus has too few turns");

  ModelConfig mc;
  mc.seed = config.seed;
  mc.asr.feature_dim = spec.dim;
  mc.da.mode = da::InputMode::kAsrFeature;
  UnifiedModel model(mc, synthetic.corpus.vocab, synthetic.corpus.tags);
  ad::Adam adam(ad::AdamOptions{1e-2});
  std::vector<const data::ConversationUnits*> batch;
  for (const auto& c : units) batch.push_back(&c);

  RecognizeOptions options;
  auto all_zero = [](const metrics::MetricReport& r) {
    for (const auto& m : {r.wer, r.ler, r.ser, r.daer}) {
      if (!m || m->numerator != 0) return false;
    }
    return r.ler_skipped_turns == 0;
  };

  OverfitResult result;
  while (result.steps < config.max_steps) {
    ad::Graph g;
    const auto losses = joint_batch_loss(g, model, batch, 0.5);
    model.store().zero_grad();
    g.backward(losses.total);
    ad::clip_grad_norm(model.store(), 5.0);
    adam.step(model.store());
    ++result.steps;
    if (result.steps % config.check_every == 0 || result.steps == config.max_steps) {
      result.report = evaluate(model, units, options).report;
      if (all_zero(result.report)) {
        result.reached = true;
        break;
      }
    }
  }
  return result;
}

metrics::MetricReport run_pipeline(std::uint64_t seed) {
  data::SyntheticSpec spec;
  spec.seed = seed;
  spec.pause_frames = 2;
  spec.conversations = 40;
  spec.segments_per_conversation = 10;
  spec.validation_conversations = 2;
  spec.test_conversations = 4;
  const auto synthetic = data::synthesize_corpus(spec);
  const auto train = data::build_units(synthetic.corpus, data::Split::kTrain, data::UnitKind::kTurnWithBoundaries);
  const auto test = data::build_units(synthetic.corpus, data::Split::kTest, data::UnitKind::kTurnWithBoundaries);

  ModelConfig mc;
  mc.seed = seed;
  mc.asr.feature_dim = spec.dim;
  mc.da.mode = da::InputMode::kHybrid;
  UnifiedModel model(mc, synthetic.corpus.vocab, synthetic.corpus.tags);
  StepwiseConfig sc;
  sc.asr.epochs = 15;
  sc.asr.seed = seed;
  sc.asr.learning_rate = 1e-2;
  sc.da.epochs = 4;
  sc.da.learning_rate = 3e-3;
  sc.da.seed = seed;
  sc.da.feature_source = FeatureSource::kTeacherForced;
  train_stepwise(model, train, sc);
  TrainingConfig jc;
  jc.epochs = 1;
  jc.seed = seed;
  train_joint(model, train, jc);

  RecognizeOptions options;
  options.beam_width = 3;
  options.n_best = 2;
  return evaluate(model, test, options).report;
}

}  // namespace s2da::unified
