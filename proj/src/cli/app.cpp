#include "s2da/cli/app.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "s2da/data/synthetic.hpp"

namespace s2da::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Every key of `j` must also appear in `schema`; nested objects recurse.
void reject_unknown(const json& j, const json& schema, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!schema.contains(key)) throw ConfigError("unknown configuration key '" + path + "'");
    if (schema.at(key).is_object()) reject_unknown(value, schema.at(key), path);
  }
}

json training_json(const unified::TrainingConfig& c) {
  json j = unified::to_json(c);
  j.erase("seed");
  return j;
}

json decode_json(const unified::RecognizeOptions& o) {
  return {{"beam_width", o.beam_width}, {"n_best", o.n_best}, {"length_penalty", o.length_penalty}};
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

/// Writes to a file when a path is given, else to the fallback stream.
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw std::runtime_error("cannot write " + path);
    }
    stream_ = path.empty() ? &fallback : &file_;
  }
  void line(const json& j) { *stream_ << j.dump() << "\n"; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

struct DecodeFlags {
  std::size_t beam_width = 1;
  std::size_t n_best = 1;
  double length_penalty = 1.0;
};

struct DecodeOptions {
  CLI::Option* beam = nullptr;
  CLI::Option* nbest = nullptr;
  CLI::Option* penalty = nullptr;
};

DecodeOptions add_decode_flags(CLI::App* cmd, DecodeFlags& f, std::string& config) {
  cmd->add_option("--config", config, "Experiment configuration whose decode section sets the defaults");
  return {cmd->add_option("--beam", f.beam_width, "Beam width")->check(CLI::PositiveNumber),
          cmd->add_option("--nbest", f.n_best, "Hypotheses kept for n-best classification")
              ->check(CLI::PositiveNumber),
          cmd->add_option("--length-penalty", f.length_penalty, "Length normalization exponent")};
}

/// Flags given on the command line win over the configuration file.
DecodeFlags resolve_decode(const DecodeFlags& flags, const DecodeOptions& given, const std::string& config) {
  DecodeFlags f = flags;
  if (!config.empty()) {
    const auto c = experiment_config_from_json(read_json_file(config));
    if (given.beam->count() == 0) f.beam_width = c.decode.beam_width;
    if (given.nbest->count() == 0) f.n_best = c.decode.n_best;
    if (given.penalty->count() == 0) f.length_penalty = c.decode.length_penalty;
  }
  if (f.n_best > f.beam_width) throw ConfigError("n_best cannot exceed the beam width");
  return f;
}

struct CorpusFlags {
  std::string manifest;
  std::string split = "test";
  std::string units = "turn_boundaries";
};

void add_corpus_flags(CLI::App* cmd, CorpusFlags& f, const std::string& name = "--corpus") {
  cmd->add_option(name, f.manifest, "Corpus manifest (JSON lines)")->required();
  cmd->add_option("--split", f.split, "train, validation or test");
  cmd->add_option("--units", f.units, "segment, turn or turn_boundaries");
}

std::vector<data::ConversationUnits> load_units(const CorpusFlags& f, data::Corpus* keep = nullptr) {
  const auto corpus = data::load_corpus(f.manifest);
  auto units = data::build_units(corpus, data::parse_split(f.split), parse_unit_kind(f.units));
  if (keep) *keep = corpus;
  return units;
}

/// Corpus units with token ids from the model's vocabulary rather than the corpus's own.
std::vector<data::ConversationUnits> load_units_for(const CorpusFlags& f, const unified::UnifiedModel& model) {
  data::Corpus corpus = data::load_corpus(f.manifest);
  corpus.vocab = model.vocab();
  const auto kind = parse_unit_kind(f.units);
  auto units = data::build_units(corpus, data::parse_split(f.split), kind);
  for (auto& conv : units) {
    for (auto& u : conv) {
      for (auto& s : u.segments) {
        if (!model.tags().contains(corpus.tags.tag(s.tag))) {
          throw std::runtime_error("tag '" + corpus.tags.tag(s.tag) + "' is unknown to the model");
        }
        s.tag = model.tags().id(corpus.tags.tag(s.tag));
      }
    }
  }
  return units;
}

unified::RecognizeOptions recognize_options(const DecodeFlags& f, const std::string& units) {
  unified::RecognizeOptions o;
  o.beam_width = f.beam_width;
  o.n_best = f.n_best;
  o.length_penalty = f.length_penalty;
  o.segment_at_boundaries = parse_unit_kind(units) == data::UnitKind::kTurnWithBoundaries;
  return o;
}

int cmd_synth(const std::string& config, std::optional<std::uint64_t> seed, const std::string& out_dir,
              std::ostream& out) {
  data::SyntheticSpec spec;
  if (!config.empty()) {
    try {
      spec = data::synthetic_spec_from_json(read_json_file(config));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    } catch (const json::exception& e) {
      throw ConfigError(e.what());
    }
  }
  if (seed) spec.seed = *seed;
  spec.validate();
  const auto synthetic = data::synthesize_corpus(spec);
  fs::create_directories(out_dir);
  data::save_corpus(synthetic.corpus, out_dir);
  write_json_file(fs::path(out_dir) / "synth_config.json", data::to_json(spec));
  out << json{{"event", "synth"},
              {"manifest", (fs::path(out_dir) / "manifest.jsonl").string()},
              {"conversations", synthetic.corpus.conversations.size()},
              {"turns", synthetic.corpus.turn_count()},
              {"segments", synthetic.corpus.segment_count()}}
             .dump()
      << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& manifest, const std::string& out_dir,
              std::ostream& out) {
  const ExperimentConfig config =
      config_path.empty() ? ExperimentConfig{} : experiment_config_from_json(read_json_file(config_path));
  const auto corpus = data::load_corpus(manifest);
  const auto units = data::build_units(corpus, data::Split::kTrain, config.units);
  if (units.empty()) throw std::runtime_error("the corpus has no training conversations");
  // The ASR stage keeps its best epoch on the validation split when there is one.
  const auto validation = data::build_units(corpus, data::Split::kValidation, config.units);
  const auto* held_out = validation.empty() ? nullptr : &validation;
  fs::create_directories(out_dir);
  write_json_file(fs::path(out_dir) / "config.json", to_json(config));

  unified::ModelConfig mc = config.model;
  if (!corpus.conversations.front().turns.front().features.frames.empty()) {
    mc.asr.feature_dim = corpus.conversations.front().turns.front().features.frames.cols();
  }
  unified::UnifiedModel model(mc, corpus.vocab, corpus.tags);
  std::ofstream log_file(fs::path(out_dir) / "train_log.jsonl");
  const unified::TrainingLog log = [&](const json& j) {
    out << j.dump() << "\n";
    log_file << j.dump() << "\n";
  };
  const auto& s = config.schedule;
  if (s == "asr") {
    unified::train_asr(model, units, config.asr_training, log, held_out);
  }
  if (s == "stepwise" || s == "stepwise+joint") {
    unified::train_stepwise(model, units, {config.asr_training, config.da_training}, log, held_out);
  }
  if (s == "joint" || s == "stepwise+joint") {
    unified::train_joint(model, units, config.joint_training, log);
  }
  const auto ckpt = fs::path(out_dir) / "model.ckpt";
  model.save(ckpt);
  out << json{{"event", "saved"}, {"checkpoint", ckpt.string()}}.dump() << "\n";
  return 0;
}

int cmd_decode(const std::string& model_path, const CorpusFlags& cf, const DecodeFlags& df,
               const std::string& out_path, std::ostream& out) {
  const auto model = unified::UnifiedModel::load(model_path);
  const auto units = load_units_for(cf, model);
  Output sink(out_path, out);
  asr::BeamOptions beam{df.beam_width, df.n_best, df.length_penalty, 0};
  for (const auto& conv : units) {
    for (const auto& u : conv) {
      json hyps = json::array();
      for (const auto& h : model.asr().beam_decode(u.frames, beam)) {
        std::vector<std::string> tokens;
        for (TokenId t : h.body()) tokens.push_back(model.vocab().word(t));
        hyps.push_back({{"tokens", tokens}, {"log_score", h.log_score},
                        {"normalized_score", h.normalized_score}, {"complete", h.complete}});
      }
      sink.line({{"id", u.id}, {"conversation_id", u.conversation_id}, {"hypotheses", hyps}});
    }
  }
  return 0;
}

int cmd_classify(const std::string& model_path, const CorpusFlags& cf, const std::string& out_path,
                 std::ostream& out) {
  const auto model = unified::UnifiedModel::load(model_path);
  const auto units = load_units_for(cf, model);
  const auto segments = unified::teacher_forced_segments(model, units);
  const bool features = model.config().da.mode != da::InputMode::kWordEmbedding;
  Output sink(out_path, out);
  metrics::Counts errors;
  for (std::size_t c = 0; c < units.size(); ++c) {
    ad::Graph g;
    da::DialogContext context(model.config().da.history);
    std::size_t k = 0;
    for (const auto& u : units[c]) {
      for (std::size_t s = 0; s < u.segments.size(); ++s, ++k) {
        const auto& seg = segments[c][k];
        const auto enc = model.da().encode_segment(
            g, {seg.words, features ? g.constant(seg.features) : ad::Var{}});
        const auto dist = model.da().classify(g, context, enc);
        std::vector<std::string> words;
        for (TokenId t : seg.words) words.push_back(model.vocab().word(t));
        errors.add(dist.predicted == seg.tag ? 0 : 1, 1);
        sink.line({{"id", u.id},
                   {"segment", s},
                   {"words", words},
                   {"gold_tag", model.tags().tag(seg.tag)},
                   {"da_tag", model.tags().tag(dist.predicted)},
                   {"posterior", dist.probs[static_cast<std::size_t>(dist.predicted)]}});
      }
    }
  }
  if (!out_path.empty()) out << json{{"event", "classified"}, {"segments", errors.denominator}, {"ler", errors.percent()}}.dump() << "\n";
  return 0;
}

int cmd_recognize(const std::string& model_path, const CorpusFlags& cf, const DecodeFlags& df,
                  const std::string& out_path, std::ostream& out) {
  const auto model = unified::UnifiedModel::load(model_path);
  const auto units = load_units_for(cf, model);
  const auto options = recognize_options(df, cf.units);
  Output sink(out_path, out);
  for (const auto& conv : units) {
    unified::ConversationRecognizer rec(model, options);
    for (const auto& u : conv) {
      json j = unified::to_json(rec.recognize(u.id, u.frames));
      j["conversation_id"] = u.conversation_id;
      sink.line(j);
    }
  }
  return 0;
}

int cmd_evaluate(const CorpusFlags& cf, const std::string& hyp_path, bool table, const std::string& out_path,
                 std::ostream& out) {
  data::Corpus corpus;
  const auto units = load_units(cf, &corpus);
  std::ifstream in(hyp_path);
  if (!in) throw std::runtime_error("cannot open hypothesis file " + hyp_path);
  std::map<std::string, metrics::TaggedTurn> hyps;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      metrics::TaggedTurn turn;
      for (const auto& s : j.at("segments")) {
        metrics::TaggedSegment seg;
        // Words outside the corpus vocabulary score as <unk>, as they do in-process.
        for (const auto& w : s.at("words")) seg.words.push_back(corpus.vocab.word(corpus.vocab.id(w.get<std::string>())));
        seg.tag = s.at("da_tag").get<std::string>();
        turn.push_back(std::move(seg));
      }
      hyps[j.at("turn_id").get<std::string>()] = std::move(turn);
    } catch (const json::exception& e) {
      throw std::runtime_error(hyp_path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  metrics::MetricReport report;
  for (const auto& conv : units) {
    for (const auto& u : conv) {
      const auto it = hyps.find(u.id);
      if (it == hyps.end()) throw std::runtime_error("no hypothesis for unit " + u.id);
      report.add_turn(unified::gold_tagged_turn(u, corpus.vocab, corpus.tags), it->second);
    }
  }
  if (!out_path.empty()) write_json_file(out_path, metrics::to_json(report));
  if (table) {
    out << metrics::format_table(report);
  } else {
    out << metrics::to_json(report).dump() << "\n";
  }
  return 0;
}

}  // namespace

void ExperimentConfig::validate() const {
  static const std::vector<std::string> schedules{"asr", "stepwise", "joint", "stepwise+joint"};
  if (std::find(schedules.begin(), schedules.end(), schedule) == schedules.end()) {
    throw ConfigError("schedule must be one of asr, stepwise, joint, stepwise+joint");
  }
  try {
    // Corpus-dependent sizes are filled in at training time.
    auto asr = model.asr;
    auto da = model.da;
    asr.vocab_size = Vocabulary::kReservedCount + 1;
    da.vocab_size = asr.vocab_size;
    da.num_tags = 1;
    da.feature_dim = asr.decoder_hidden;
    asr.validate();
    da.validate();
    asr_training.validate();
    da_training.validate();
    joint_training.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (decode.beam_width < 1 || decode.n_best < 1) throw ConfigError("decode: beam_width and n_best must be positive");
  if (decode.n_best > decode.beam_width) throw ConfigError("decode: n_best cannot exceed beam_width");
}

nlohmann::json to_json(const ExperimentConfig& c) {
  json model = unified::to_json(c.model);
  // Feature width, vocabulary and tag counts come from the corpus.
  model.erase("seed");
  model["asr"].erase("vocab_size");
  model["asr"].erase("feature_dim");
  model["da"].erase("vocab_size");
  model["da"].erase("num_tags");
  model["da"].erase("feature_dim");
  return {{"seed", c.seed},
          {"units", to_string(c.units)},
          {"schedule", c.schedule},
          {"model", model},
          {"asr_training", training_json(c.asr_training)},
          {"da_training", training_json(c.da_training)},
          {"joint_training", training_json(c.joint_training)},
          {"decode", decode_json(c.decode)}};
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  // The schema is the echo of the defaults.
  reject_unknown(j, to_json(c), "");
  try {
    c.seed = j.value("seed", c.seed);
    if (j.contains("units")) c.units = parse_unit_kind(j.at("units").get<std::string>());
    c.schedule = j.value("schedule", c.schedule);
    if (j.contains("model")) c.model = unified::model_config_from_json(j.at("model"));
    auto training = [&](const char* key, unified::TrainingConfig& t) {
      if (j.contains(key)) t = unified::training_config_from_json(j.at(key), t);
    };
    training("asr_training", c.asr_training);
    training("da_training", c.da_training);
    training("joint_training", c.joint_training);
    if (j.contains("decode")) {
      const auto& d = j.at("decode");
      c.decode.beam_width = d.value("beam_width", c.decode.beam_width);
      c.decode.n_best = d.value("n_best", c.decode.n_best);
      c.decode.length_penalty = d.value("length_penalty", c.decode.length_penalty);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("configuration: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  c.model.seed = c.seed;
  c.asr_training.seed = c.seed;
  c.da_training.seed = c.seed;
  c.joint_training.seed = c.seed;
  c.decode.segment_at_boundaries = c.units == data::UnitKind::kTurnWithBoundaries;
  c.validate();
  return c;
}

std::string to_string(data::UnitKind kind) {
  switch (kind) {
    case data::UnitKind::kSegment: return "segment";
    case data::UnitKind::kTurn: return "turn";
    case data::UnitKind::kTurnWithBoundaries: return "turn_boundaries";
  }
  return "turn_boundaries";
}

data::UnitKind parse_unit_kind(const std::string& name) {
  if (name == "segment") return data::UnitKind::kSegment;
  if (name == "turn") return data::UnitKind::kTurn;
  if (name == "turn_boundaries") return data::UnitKind::kTurnWithBoundaries;
  throw ConfigError("unknown unit kind '" + name + "' (expected segment, turn or turn_boundaries)");
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint speech recognition and dialog act classification", "s2da"};
  app.require_subcommand(1);

  std::string config, out_dir, model, hyp, out_path;
  std::uint64_t seed_value = 0;
  CorpusFlags corpus_flags;
  DecodeFlags decode_flags;
  bool table = false;
  std::string manifest;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  synth->add_option("--config", config, "Synthetic corpus specification (JSON)");
  auto* seed_opt = synth->add_option("--seed", seed_value, "Override the generator seed");
  synth->add_option("--out", out_dir, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Train a unified model");
  train->add_option("--config", config, "Experiment configuration (JSON)");
  train->add_option("--corpus", manifest, "Corpus manifest (JSON lines)")->required();
  train->add_option("--out", out_dir, "Output directory")->required();

  auto* decode = app.add_subcommand("decode", "Decode with the ASR submodel");
  decode->add_option("--model", model, "Checkpoint")->required();
  add_corpus_flags(decode, corpus_flags);
  const auto decode_given = add_decode_flags(decode, decode_flags, config);
  decode->add_option("--out", out_path, "Output file (JSON lines); standard output when omitted");

  auto* classify = app.add_subcommand("classify", "Tag gold segments with teacher-forced ASR features");
  classify->add_option("--model", model, "Checkpoint")->required();
  add_corpus_flags(classify, corpus_flags);
  classify->add_option("--out", out_path, "Output file (JSON lines); standard output when omitted");

  auto* recognize = app.add_subcommand("recognize", "Decode, segment and tag every unit");
  recognize->add_option("--model", model, "Checkpoint")->required();
  add_corpus_flags(recognize, corpus_flags);
  const auto recognize_given = add_decode_flags(recognize, decode_flags, config);
  recognize->add_option("--out", out_path, "Output file (JSON lines); standard output when omitted");

  auto* evaluate = app.add_subcommand("evaluate", "Score hypotheses against a gold corpus");
  add_corpus_flags(evaluate, corpus_flags, "--gold");
  evaluate->add_option("--hyp", hyp, "Recognized turns or a corpus manifest (JSON lines)")->required();
  evaluate->add_flag("--table", table, "Print a table instead of JSON");
  evaluate->add_option("--out", out_path, "Also write the report to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const auto* active = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << active->help();
    return 2;
  }

  try {
    if (*synth) {
      std::optional<std::uint64_t> seed;
      if (seed_opt->count() > 0) seed = seed_value;
      return cmd_synth(config, seed, out_dir, out);
    }
    if (*train) return cmd_train(config, manifest, out_dir, out);
    if (*decode) {
      return cmd_decode(model, corpus_flags, resolve_decode(decode_flags, decode_given, config), out_path, out);
    }
    if (*classify) return cmd_classify(model, corpus_flags, out_path, out);
    if (*recognize) {
      return cmd_recognize(model, corpus_flags, resolve_decode(decode_flags, recognize_given, config), out_path,
                           out);
    }
    if (*evaluate) return cmd_evaluate(corpus_flags, hyp, table, out_path, out);
  } catch (const ConfigError& e) {
    err << json{{"error", e.what()}, {"kind", "usage"}}.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << json{{"error", e.what()}, {"kind", "runtime"}}.dump() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace s2da::cli
