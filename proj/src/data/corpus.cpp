#include "s2da/data/corpus.hpp"

#include <fstream>
#include <map>
#include <set>

#include "json.hpp"

namespace s2da::data {

using nlohmann::json;

std::string to_string(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kValidation:
      return "validation";
    case Split::kTest:
      return "test";
  }
  return "train";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "validation" || name == "valid" || name == "dev") return Split::kValidation;
  if (name == "test") return Split::kTest;
  throw CorpusError("unknown split '" + name + "'");
}

std::size_t Turn::word_count() const {
  std::size_t n = 0;
  for (const auto& s : segments) n += s.words.size();
  return n;
}

std::vector<std::string> Turn::words() const {
  std::vector<std::string> out;
  for (const auto& s : segments) out.insert(out.end(), s.words.begin(), s.words.end());
  return out;
}

std::vector<const Conversation*> Corpus::conversations_in(Split split) const {
  std::vector<const Conversation*> out;
  for (const auto& c : conversations) {
    if (c.split == split) out.push_back(&c);
  }
  return out;
}

std::size_t Corpus::turn_count() const {
  std::size_t n = 0;
  for (const auto& c : conversations) n += c.turns.size();
  return n;
}

std::size_t Corpus::segment_count() const {
  std::size_t n = 0;
  for (const auto& c : conversations) {
    for (const auto& t : c.turns) n += t.segments.size();
  }
  return n;
}

Corpus assemble_corpus(std::vector<Conversation> conversations) {
  Corpus corpus;
  std::vector<std::string> train_words, tags;
  std::set<std::string> turn_ids;
  for (const auto& conv : conversations) {
    for (const auto& turn : conv.turns) {
      if (!turn_ids.insert(turn.conversation_id + "/" + turn.turn_id).second) {
        throw CorpusError("duplicate turn id " + turn.turn_id + " in conversation " +
                          turn.conversation_id);
      }
      if (turn.segments.empty()) throw CorpusError("turn " + turn.turn_id + " has no segments");
      for (const auto& seg : turn.segments) {
        if (seg.words.empty()) throw CorpusError("turn " + turn.turn_id + " has an empty segment");
        if (seg.da_tag.empty()) throw CorpusError("turn " + turn.turn_id + " has an untagged segment");
        for (const auto& w : seg.words) {
          if (w.empty() || (w.front() == '<' && w.back() == '>')) {
            throw CorpusError("turn " + turn.turn_id + " contains reserved or empty word '" + w + "'");
          }
        }
        tags.push_back(seg.da_tag);
        if (conv.split == Split::kTrain) {
          train_words.insert(train_words.end(), seg.words.begin(), seg.words.end());
        }
        if (seg.frames && !turn.features.empty()) {
          if (seg.frames->begin >= seg.frames->end || seg.frames->end > turn.features.length()) {
            throw CorpusError("turn " + turn.turn_id + " has a segment frame span outside its " +
                              std::to_string(turn.features.length()) + " frames");
          }
        }
      }
    }
  }
  corpus.vocab = Vocabulary::from_words(train_words);
  corpus.tags = TagSet::from_tags(tags);
  corpus.conversations = std::move(conversations);
  return corpus;
}

namespace {

template <class T>
T required(const json& rec, const char* field, std::size_t line) {
  if (!rec.contains(field) || rec.at(field).is_null()) {
    throw CorpusError("manifest line " + std::to_string(line) + ": missing required field '" +
                      field + "'");
  }
  try {
    return rec.at(field).get<T>();
  } catch (const json::exception&) {
    throw CorpusError("manifest line " + std::to_string(line) + ": field '" + field +
                      "' has the wrong type");
  }
}

template <class T>
T optional_field(const json& rec, const char* field, T fallback, std::size_t line) {
  if (!rec.contains(field) || rec.at(field).is_null()) return fallback;
  try {
    return rec.at(field).get<T>();
  } catch (const json::exception&) {
    throw CorpusError("manifest line " + std::to_string(line) + ": field '" + field +
                      "' has the wrong type");
  }
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw CorpusError("cannot open manifest " + manifest.string());
  const auto base = manifest.parent_path();

  std::vector<Conversation> conversations;
  std::map<std::string, std::size_t> conv_index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw CorpusError("manifest line " + std::to_string(line_no) + ": malformed JSON (" +
                        e.what() + ")");
    }
    if (!rec.is_object()) {
      throw CorpusError("manifest line " + std::to_string(line_no) + ": record is not an object");
    }
    Turn turn;
    turn.conversation_id = required<std::string>(rec, "conversation_id", line_no);
    turn.turn_id = required<std::string>(rec, "turn_id", line_no);
    turn.speaker = optional_field<std::string>(rec, "speaker", "", line_no);
    turn.feature_ref = optional_field<std::string>(rec, "feature_ref", "", line_no);
    const Split split =
        parse_split(optional_field<std::string>(rec, "split", "train", line_no));
    const auto segments = required<json>(rec, "segments", line_no);
    if (!segments.is_array() || segments.empty()) {
      throw CorpusError("manifest line " + std::to_string(line_no) +
                        ": 'segments' must be a non-empty array");
    }
    for (const auto& s : segments) {
      DASegment seg;
      seg.words = required<std::vector<std::string>>(s, "words", line_no);
      seg.da_tag = required<std::string>(s, "da_tag", line_no);
      if (s.contains("frames") && !s.at("frames").is_null()) {
        const auto span = s.at("frames").get<std::vector<std::size_t>>();
        if (span.size() != 2) {
          throw CorpusError("manifest line " + std::to_string(line_no) +
                            ": 'frames' must be [begin, end]");
        }
        seg.frames = FrameSpan{span[0], span[1]};
      }
      turn.segments.push_back(std::move(seg));
    }
    if (!turn.feature_ref.empty()) {
      try {
        turn.features = read_feature_file(base / turn.feature_ref);
      } catch (const FeatureFileError& e) {
        throw CorpusError("manifest line " + std::to_string(line_no) + ": " + e.what());
      }
      const auto declared = optional_field<std::size_t>(rec, "num_frames", 0, line_no);
      if (declared != 0 && declared != turn.features.length()) {
        throw CorpusError("manifest line " + std::to_string(line_no) + ": num_frames " +
                          std::to_string(declared) + " but feature file holds " +
                          std::to_string(turn.features.length()));
      }
    }

    auto [it, inserted] = conv_index.emplace(turn.conversation_id, conversations.size());
    if (inserted) {
      conversations.push_back(Conversation{turn.conversation_id, split, {}});
    } else if (conversations[it->second].split != split) {
      throw CorpusError("manifest line " + std::to_string(line_no) + ": conversation " +
                        turn.conversation_id + " appears in more than one split");
    }
    conversations[it->second].turns.push_back(std::move(turn));
  }
  if (conversations.empty()) throw CorpusError("manifest " + manifest.string() + " has no turns");
  return assemble_corpus(std::move(conversations));
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "manifest.jsonl", std::ios::trunc);
  if (!out) throw CorpusError("cannot write manifest in " + dir.string());
  for (const auto& conv : corpus.conversations) {
    for (const auto& turn : conv.turns) {
      json rec;
      rec["conversation_id"] = turn.conversation_id;
      rec["turn_id"] = turn.turn_id;
      rec["speaker"] = turn.speaker;
      rec["split"] = to_string(conv.split);
      if (!turn.features.empty()) {
        std::string ref = turn.feature_ref;
        if (ref.empty()) ref = "feats/" + turn.turn_id + ".feat";
        const auto path = dir / ref;
        std::filesystem::create_directories(path.parent_path());
        write_feature_file(path, turn.features);
        rec["feature_ref"] = ref;
        rec["num_frames"] = turn.features.length();
      }
      json segs = json::array();
      for (const auto& seg : turn.segments) {
        json s;
        s["words"] = seg.words;
        s["da_tag"] = seg.da_tag;
        if (seg.frames) s["frames"] = {seg.frames->begin, seg.frames->end};
        segs.push_back(std::move(s));
      }
      rec["segments"] = std::move(segs);
      out << rec.dump() << '\n';
    }
  }
}

}  // namespace s2da::data
