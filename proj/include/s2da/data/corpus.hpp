#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "s2da/asr/vocabulary.hpp"
#include "s2da/da/tag_set.hpp"
#include "s2da/data/feature_file.hpp"

namespace s2da::data {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Split { kTrain, kValidation, kTest };
std::string to_string(Split split);
Split parse_split(const std::string& name);

/// Half-open frame range [begin, end) inside the turn's feature sequence.
struct FrameSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  friend bool operator==(const FrameSpan&, const FrameSpan&) = default;
};

struct DASegment {
  std::vector<std::string> words;
  std::string da_tag;
  std::optional<FrameSpan> frames;
  friend bool operator==(const DASegment&, const DASegment&) = default;
};

struct Turn {
  std::string conversation_id;
  std::string turn_id;
  std::string speaker;
  std::string feature_ref;  // relative to the manifest directory; empty for text-only turns
  std::vector<DASegment> segments;
  FeatureSequence features;

  std::size_t word_count() const;
  std::vector<std::string> words() const;
  friend bool operator==(const Turn&, const Turn&) = default;
};

struct Conversation {
  std::string id;
  Split split = Split::kTrain;
  std::vector<Turn> turns;
  friend bool operator==(const Conversation&, const Conversation&) = default;
};

/// Conversations in manifest order. The vocabulary is built from the train
/// split only; the tag set from every split.
struct Corpus {
  std::vector<Conversation> conversations;
  Vocabulary vocab;
  TagSet tags;

  std::vector<const Conversation*> conversations_in(Split split) const;
  std::size_t turn_count() const;
  std::size_t segment_count() const;
};

/// Builds vocabulary and tag set and validates the corpus invariants
/// (non-empty segments, one split per conversation, unique turn ids).
Corpus assemble_corpus(std::vector<Conversation> conversations);

/// Manifest: JSON-lines, one record per turn:
///   {"conversation_id", "turn_id", "speaker"?, "feature_ref"?, "split"?, "num_frames"?,
///    "segments": [{"words": [...], "da_tag": "...", "frames"?: [begin, end]}]}
/// Feature files are resolved relative to the manifest's directory.
Corpus load_corpus(const std::filesystem::path& manifest);

/// Writes `manifest.jsonl` plus one feature file per turn that has features
/// (at its feature_ref, defaulting to feats/<turn_id>.feat).
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);

}  // namespace s2da::data
