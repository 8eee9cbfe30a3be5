#include "s2da/data/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <stdexcept>

namespace s2da::data {

using nlohmann::json;

namespace {

const char* const kTagNames[] = {"sd", "b", "sv", "aa", "qy", "ny", "qw", "nn",
                                 "bk", "ba", "fc", "qo", "h",  "bf", "na", "ad"};

std::string tag_name(std::size_t i) {
  if (i < std::size(kTagNames)) return kTagNames[i];
  char buf[32];
  std::snprintf(buf, sizeof(buf), "da%02zu", i);
  return buf;
}

bool is_slot(const std::string& s) { return s == "_" || s == "?"; }

struct Generator {
  const SyntheticSpec& spec;
  std::vector<std::string> tags;
  std::vector<std::string> fillers;
  std::map<std::string, std::vector<SegmentTemplate>> templates;
  std::map<std::string, std::size_t> word_index;
  ad::Tensor prototypes;
  std::vector<std::size_t> preferred_next;
};

}  // namespace

std::string synthetic_word(std::size_t index, std::size_t vocab_size) {
  const int width = vocab_size > 100 ? (vocab_size > 1000 ? 4 : 3) : 2;
  char buf[16];
  std::snprintf(buf, sizeof(buf), "w%0*zu", width, index);
  return buf;
}

void SyntheticSpec::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("synthetic spec: " + m); };
  if (dim < 1) fail("feature dimension must be at least 1");
  if (sigma < 0) fail("noise sigma must be non-negative");
  if (min_frames_per_token < 1 || min_frames_per_token > max_frames_per_token) {
    fail("frames-per-token range must satisfy 1 <= min <= max");
  }
  if (conversations < 1) fail("at least one conversation is required");
  if (validation_conversations + test_conversations >= conversations) {
    fail("validation and test conversations leave no training data");
  }
  if (segments_per_conversation < 1 || max_segments_per_turn < 1) {
    fail("segment counts must be positive");
  }
  if (tag_ambiguity < 0 || tag_ambiguity > 1) fail("tag_ambiguity must lie in [0, 1]");
  if (transition_bias < 0 || transition_bias > 1) fail("transition_bias must lie in [0, 1]");
  if (templates.empty()) {
    if (num_tags < 1) fail("at least one tag is required");
    if (templates_per_tag < 1) fail("templates_per_tag must be positive");
    if (filler_words < 2) fail("at least two filler words are required");
    if (vocab_size < filler_words + num_tags) fail("vocabulary too small for one keyword per tag");
  } else {
    for (const auto& [tag, list] : templates) {
      if (list.empty()) fail("tag '" + tag + "' has no templates");
      for (const auto& t : list) {
        if (t.empty()) fail("tag '" + tag + "' has an empty template");
        for (std::size_t i = 1; i < t.size(); ++i) {
          if (!is_slot(t[i]) && t[i] == t[i - 1]) {
            fail("template of tag '" + tag + "' repeats word '" + t[i] + "' back to back");
          }
        }
      }
    }
    if (filler_words < 2) fail("at least two filler words are required");
  }
}

SyntheticSpec synthetic_spec_from_json(const json& j) {
  SyntheticSpec s;
  if (!j.is_object()) throw std::invalid_argument("synthetic spec must be a JSON object");
  static const char* const known[] = {
      "vocab_size", "num_tags", "dim", "sigma", "pause_frames", "min_frames_per_token",
      "max_frames_per_token", "conversations", "segments_per_conversation",
      "max_segments_per_turn", "validation_conversations", "test_conversations",
      "filler_words", "templates_per_tag", "tag_ambiguity", "transition_bias", "seed",
      "templates"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      throw std::invalid_argument("synthetic spec: unknown field '" + key + "'");
    }
  }
  auto get = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const json::exception&) {
      throw std::invalid_argument(std::string("synthetic spec: field '") + key +
                                  "' has the wrong type");
    }
  };
  get("vocab_size", s.vocab_size);
  get("num_tags", s.num_tags);
  get("dim", s.dim);
  get("sigma", s.sigma);
  get("pause_frames", s.pause_frames);
  get("min_frames_per_token", s.min_frames_per_token);
  get("max_frames_per_token", s.max_frames_per_token);
  get("conversations", s.conversations);
  get("segments_per_conversation", s.segments_per_conversation);
  get("max_segments_per_turn", s.max_segments_per_turn);
  get("validation_conversations", s.validation_conversations);
  get("test_conversations", s.test_conversations);
  get("filler_words", s.filler_words);
  get("templates_per_tag", s.templates_per_tag);
  get("tag_ambiguity", s.tag_ambiguity);
  get("transition_bias", s.transition_bias);
  get("seed", s.seed);
  get("templates", s.templates);
  s.validate();
  return s;
}

json to_json(const SyntheticSpec& s) {
  json j = {{"vocab_size", s.vocab_size},
            {"num_tags", s.num_tags},
            {"dim", s.dim},
            {"sigma", s.sigma},
            {"pause_frames", s.pause_frames},
            {"min_frames_per_token", s.min_frames_per_token},
            {"max_frames_per_token", s.max_frames_per_token},
            {"conversations", s.conversations},
            {"segments_per_conversation", s.segments_per_conversation},
            {"max_segments_per_turn", s.max_segments_per_turn},
            {"validation_conversations", s.validation_conversations},
            {"test_conversations", s.test_conversations},
            {"filler_words", s.filler_words},
            {"templates_per_tag", s.templates_per_tag},
            {"tag_ambiguity", s.tag_ambiguity},
            {"transition_bias", s.transition_bias},
            {"seed", s.seed}};
  if (!s.templates.empty()) j["templates"] = s.templates;
  return j;
}

namespace {

void build_lexicon(Generator& gen, std::mt19937_64& rng) {
  const auto& spec = gen.spec;
  std::vector<std::string> keywords;
  if (spec.templates.empty()) {
    for (std::size_t i = 0; i < spec.vocab_size; ++i) {
      auto w = synthetic_word(i, spec.vocab_size);
      (i < spec.filler_words ? gen.fillers : keywords).push_back(w);
    }
    for (std::size_t t = 0; t < spec.num_tags; ++t) gen.tags.push_back(tag_name(t));
    // Keywords are dealt round-robin so every tag owns at least one.
    std::vector<std::vector<std::string>> owned(spec.num_tags);
    for (std::size_t i = 0; i < keywords.size(); ++i) owned[i % spec.num_tags].push_back(keywords[i]);
    for (std::size_t t = 0; t < spec.num_tags; ++t) {
      auto& list = gen.templates[gen.tags[t]];
      for (std::size_t k = 0; k < spec.templates_per_tag; ++k) {
        std::uniform_int_distribution<std::size_t> len_dist(2, 5);
        const std::size_t len = len_dist(rng);
        SegmentTemplate tpl(len, "_");
        const std::size_t n_kw = std::min<std::size_t>(len == 2 ? 1 : 2, owned[t].size());
        std::vector<std::size_t> positions(len);
        for (std::size_t i = 0; i < len; ++i) positions[i] = i;
        std::shuffle(positions.begin(), positions.end(), rng);
        std::vector<std::string> kws = owned[t];
        std::shuffle(kws.begin(), kws.end(), rng);
        for (std::size_t i = 0; i < n_kw; ++i) tpl[positions[i]] = kws[i];
        for (std::size_t i = 0; i < len; ++i) {
          if (tpl[i] == "_" && std::bernoulli_distribution(0.3)(rng)) tpl[i] = "?";
        }
        list.push_back(std::move(tpl));
      }
    }
  } else {
    for (const auto& [tag, list] : spec.templates) {
      gen.tags.push_back(tag);
      for (const auto& tpl : list) {
        for (const auto& w : tpl) {
          if (!is_slot(w)) keywords.push_back(w);
        }
      }
    }
    gen.templates = spec.templates;
    std::sort(keywords.begin(), keywords.end());
    keywords.erase(std::unique(keywords.begin(), keywords.end()), keywords.end());
    for (std::size_t i = 0; gen.fillers.size() < spec.filler_words; ++i) {
      auto w = "f" + synthetic_word(i, spec.filler_words).substr(1);
      if (!std::binary_search(keywords.begin(), keywords.end(), w)) gen.fillers.push_back(w);
    }
  }

  std::vector<std::string> all = gen.fillers;
  all.insert(all.end(), keywords.begin(), keywords.end());
  std::sort(all.begin(), all.end());
  gen.prototypes = ad::Tensor::zeros(all.size(), spec.dim);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < all.size(); ++i) {
    gen.word_index[all[i]] = i;
    for (std::size_t d = 0; d < spec.dim; ++d) {
      gen.prototypes.at(i, d) = static_cast<float>(normal(rng));
    }
  }

  const std::size_t n = gen.tags.size();
  gen.preferred_next.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    if (n == 1) {
      gen.preferred_next[t] = 0;
      continue;
    }
    std::uniform_int_distribution<std::size_t> pick(0, n - 2);
    const std::size_t k = pick(rng);
    gen.preferred_next[t] = k >= t ? k + 1 : k;
  }
}

std::vector<std::string> render(const Generator& gen, const SegmentTemplate& tpl,
                                const std::string& previous, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick_filler(0, gen.fillers.size() - 1);
  std::vector<std::string> out;
  for (const auto& slot : tpl) {
    if (slot == "?" && std::bernoulli_distribution(0.5)(rng)) continue;
    const std::string& prev = out.empty() ? previous : out.back();
    if (is_slot(slot)) {
      std::string w;
      do {
        w = gen.fillers[pick_filler(rng)];
      } while (w == prev);
      out.push_back(std::move(w));
    } else {
      if (slot == prev) return {};
      out.push_back(slot);
    }
  }
  return out;
}

Conversation synthesize_conversation(const Generator& gen, std::size_t index, Split split) {
  const auto& spec = gen.spec;
  std::seed_seq seq{static_cast<std::uint64_t>(spec.seed), static_cast<std::uint64_t>(index),
                    std::uint64_t{0x5eed}};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> frames_dist(spec.min_frames_per_token,
                                                         spec.max_frames_per_token);
  std::uniform_int_distribution<std::size_t> turn_len(1, spec.max_segments_per_turn);
  std::uniform_int_distribution<std::size_t> any_tag(0, gen.tags.size() - 1);

  char id[32];
  std::snprintf(id, sizeof(id), "c%04zu", index);
  Conversation conv{id, split, {}};

  std::size_t tag = any_tag(rng);
  std::size_t remaining = spec.segments_per_conversation;
  bool first = true;
  while (remaining > 0) {
    Turn turn;
    turn.conversation_id = conv.id;
    std::snprintf(id, sizeof(id), "%s_t%03zu", conv.id.c_str(), conv.turns.size());
    turn.turn_id = id;
    turn.speaker = conv.turns.size() % 2 == 0 ? "A" : "B";

    std::vector<double> frames;
    std::size_t n_frames = 0;
    auto emit = [&](std::span<const double> proto) {
      for (std::size_t d = 0; d < spec.dim; ++d) {
        const double v = (proto.empty() ? 0.0 : proto[d]) + spec.sigma * noise(rng);
        frames.push_back(static_cast<float>(v));
      }
      ++n_frames;
    };

    const std::size_t n_segments = std::min(turn_len(rng), remaining);
    std::string previous;
    for (std::size_t s = 0; s < n_segments; ++s) {
      if (!first) {
        if (std::bernoulli_distribution(spec.transition_bias)(rng)) {
          tag = gen.preferred_next[tag];
        } else {
          tag = any_tag(rng);
        }
      }
      first = false;
      std::size_t source = tag;
      if (gen.tags.size() > 1 && std::bernoulli_distribution(spec.tag_ambiguity)(rng)) {
        std::uniform_int_distribution<std::size_t> other(0, gen.tags.size() - 2);
        const std::size_t k = other(rng);
        source = k >= tag ? k + 1 : k;
      }
      const auto& options = gen.templates.at(gen.tags[source]);
      std::uniform_int_distribution<std::size_t> pick_tpl(0, options.size() - 1);
      std::vector<std::string> words;
      // Templates whose literals all collide with the previous word are
      // eventually rendered anyway.
      for (int attempt = 0; words.empty(); ++attempt) {
        words = render(gen, options[pick_tpl(rng)], attempt < 100 ? previous : "", rng);
      }

      DASegment seg;
      seg.da_tag = gen.tags[tag];
      const std::size_t begin = n_frames;
      for (const auto& w : words) {
        const auto proto = gen.prototypes.row_span(gen.word_index.at(w));
        const std::size_t k = frames_dist(rng);
        for (std::size_t f = 0; f < k; ++f) emit(proto);
      }
      seg.frames = FrameSpan{begin, n_frames};
      for (std::size_t f = 0; f < spec.pause_frames; ++f) emit({});
      previous = spec.pause_frames > 0 ? std::string() : words.back();
      seg.words = std::move(words);
      turn.segments.push_back(std::move(seg));
    }
    remaining -= n_segments;
    turn.features.frames = ad::Tensor::matrix(n_frames, spec.dim, std::move(frames));
    conv.turns.push_back(std::move(turn));
  }
  return conv;
}

}  // namespace

SyntheticCorpus synthesize_corpus(const SyntheticSpec& spec) {
  spec.validate();
  Generator gen{spec, {}, {}, {}, {}, {}, {}};
  std::mt19937_64 rng(spec.seed);
  build_lexicon(gen, rng);

  std::vector<Conversation> conversations;
  conversations.reserve(spec.conversations);
  const std::size_t n_train =
      spec.conversations - spec.validation_conversations - spec.test_conversations;
  for (std::size_t c = 0; c < spec.conversations; ++c) {
    const Split split = c < n_train ? Split::kTrain
                        : c < n_train + spec.validation_conversations ? Split::kValidation
                                                                       : Split::kTest;
    conversations.push_back(synthesize_conversation(gen, c, split));
  }

  SyntheticCorpus out;
  out.corpus = assemble_corpus(std::move(conversations));
  out.words.resize(gen.word_index.size());
  for (const auto& [w, i] : gen.word_index) out.words[i] = w;
  out.prototypes = std::move(gen.prototypes);
  out.templates = std::move(gen.templates);
  return out;
}

}  // namespace s2da::data
