#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "s2da/cli/app.hpp"

using namespace s2da;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "s2da");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("s2da_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string small_corpus(const fs::path& dir) {
  write(dir / "spec.json",
        R"({"conversations": 10, "segments_per_conversation": 6, "validation_conversations": 1,
            "test_conversations": 2, "pause_frames": 2, "sigma": 0.2, "seed": 4})");
  const auto r = run({"synth", "--config", (dir / "spec.json").string(), "--out", (dir / "corpus").string()});
  REQUIRE(r.code == 0);
  return (dir / "corpus" / "manifest.jsonl").string();
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(run({}).code == 2);
  CHECK(run({"fly"}).code == 2);
  const auto r = run({"evaluate", "--gold", "a", "--hyp", "b", "--bogus"});
  CHECK(r.code == 2);
  CHECK(r.err.find("Usage") != std::string::npos);
  CHECK(run({"synth", "--help"}).code == 0);
}

TEST_CASE("bad configurations are rejected before any work") {
  const auto dir = scratch("config");
  write(dir / "bad_key.json", R"({"model": {"asr": {"hiden": 3}}})");
  write(dir / "bad_type.json", R"({"seed": "one"})");
  write(dir / "bad_value.json", R"({"asr_training": {"lambda": 2.0}})");
  write(dir / "not_json.json", "{");
  for (const char* name : {"bad_key.json", "bad_type.json", "bad_value.json", "not_json.json"}) {
    const auto r = run({"train", "--config", (dir / name).string(), "--corpus", "missing.jsonl", "--out",
                        (dir / "run").string()});
    CHECK_MESSAGE(r.code == 2, name);
    CHECK(r.err.find("\"error\"") != std::string::npos);
  }
  CHECK_FALSE(fs::exists(dir / "run"));
}

TEST_CASE("runtime failures exit with code 1 and a structured message") {
  const auto r = run({"decode", "--model", "/nonexistent/model.ckpt", "--corpus", "/nonexistent/m.jsonl"});
  CHECK(r.code == 1);
  CHECK(r.err.find("\"kind\":\"runtime\"") != std::string::npos);
}

TEST_CASE("configuration echo round-trips") {
  cli::ExperimentConfig c;
  c.seed = 7;
  c.schedule = "joint";
  c.units = data::UnitKind::kSegment;
  const auto parsed = cli::experiment_config_from_json(cli::to_json(c));
  CHECK(cli::to_json(parsed) == cli::to_json(cli::experiment_config_from_json(cli::to_json(parsed))));
  CHECK(parsed.seed == 7);
  CHECK(parsed.asr_training.seed == 7);
  CHECK(parsed.model.seed == 7);
  CHECK(parsed.joint_training.lambda == 0.1);
  CHECK_FALSE(parsed.decode.segment_at_boundaries);
}

TEST_CASE("evaluating a corpus against itself scores zero") {
  const auto dir = scratch("identity");
  const auto manifest = small_corpus(dir);
  const auto r = run({"evaluate", "--gold", manifest, "--hyp", manifest, "--table"});
  REQUIRE(r.code == 0);
  for (const char* metric : {"wer", "ler", "ser", "nser", "daer"}) {
    const auto pos = r.out.find(metric);
    REQUIRE(pos != std::string::npos);
    CHECK(r.out.substr(pos, 19).find("0.00") != std::string::npos);
  }
}

TEST_CASE("recognize then evaluate reproduces the in-process report") {
  const auto dir = scratch("pipeline");
  const auto manifest = small_corpus(dir);
  write(dir / "exp.json",
        R"({"seed": 3, "model": {"da": {"mode": "hybrid", "history": 2}},
            "asr_training": {"epochs": 4, "learning_rate": 0.01}, "da_training": {"epochs": 2},
            "joint_training": {"epochs": 1}, "decode": {"beam_width": 2, "n_best": 2}})");
  const auto run_dir = dir / "run";
  const auto t = run({"train", "--config", (dir / "exp.json").string(), "--corpus", manifest, "--out", run_dir.string()});
  REQUIRE(t.code == 0);
  CHECK(fs::exists(run_dir / "config.json"));
  CHECK(fs::exists(run_dir / "train_log.jsonl"));
  CHECK(t.out.find("\"phase\":\"joint\"") != std::string::npos);

  const auto hyp = (dir / "hyp.jsonl").string();
  const auto r = run({"recognize", "--model", (run_dir / "model.ckpt").string(), "--corpus", manifest, "--config",
                      (run_dir / "config.json").string(), "--out", hyp});
  REQUIRE(r.code == 0);
  const auto e = run({"evaluate", "--gold", manifest, "--hyp", hyp});
  REQUIRE(e.code == 0);

  const auto model = unified::UnifiedModel::load(run_dir / "model.ckpt");
  const auto corpus = data::load_corpus(manifest);
  const auto units = data::build_units(corpus, data::Split::kTest, data::UnitKind::kTurnWithBoundaries);
  unified::RecognizeOptions options;
  options.beam_width = 2;
  options.n_best = 2;
  const auto in_process = unified::evaluate(model, units, options).report;
  CHECK(nlohmann::json::parse(e.out) == metrics::to_json(in_process));
  CHECK(metrics::report_from_json(nlohmann::json::parse(e.out)) == in_process);
}
