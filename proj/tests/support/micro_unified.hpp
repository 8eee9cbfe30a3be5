#pragma once

// Micro-sized unified models and hand-built units for tests.

#include <random>
#include <string>
#include <vector>

#include "s2da/data/utterances.hpp"
#include "s2da/unified/model.hpp"

namespace s2da::testing {

inline Vocabulary tiny_vocab() {
  const std::vector<std::string> words{"yeah", "i", "am", "a", "student"};
  return Vocabulary::from_words(words);
}

inline TagSet tiny_tags() {
  const std::vector<std::string> tags{"aa", "sd", "qy"};
  return TagSet::from_list(tags);
}

inline unified::ModelConfig tiny_config(da::InputMode mode, std::uint64_t seed) {
  unified::ModelConfig c;
  c.seed = seed;
  c.asr.feature_dim = 3;
  c.asr.encoder_hidden = 3;
  c.asr.encoder_layers = 1;
  c.asr.subsample = {1};
  c.asr.embedding_dim = 3;
  c.asr.decoder_hidden = 4;
  c.asr.attention = {3, 3, 2};
  c.da.mode = mode;
  c.da.embedding_dim = 4;
  c.da.word_hidden = 3;
  c.da.word_layers = 1;
  c.da.utterance_hidden = 3;
  c.da.history = 2;
  return c;
}

inline data::Utterance make_unit(std::mt19937_64& rng, const std::string& id,
                                 std::vector<std::vector<TokenId>> segments, std::vector<TagId> tags,
                                 bool markers) {
  data::Utterance u;
  u.id = id;
  std::size_t words = 0;
  for (std::size_t k = 0; k < segments.size(); ++k) {
    u.segments.push_back({words, words + segments[k].size(), tags[k]});
    words += segments[k].size();
    u.targets.insert(u.targets.end(), segments[k].begin(), segments[k].end());
    if (markers) u.targets.push_back(Vocabulary::kDaEnd);
  }
  u.targets.push_back(Vocabulary::kEos);
  std::normal_distribution<double> n(0.0, 1.0);
  u.frames = ad::Tensor::zeros(2 * words + 1, 3);
  for (double& v : u.frames.data()) v = n(rng);
  return u;
}

inline std::vector<data::ConversationUnits> tiny_units(std::uint64_t seed, bool markers) {
  std::mt19937_64 rng(seed);
  std::vector<data::ConversationUnits> out(2);
  out[0].push_back(make_unit(rng, "t1", {{4}, {5, 6, 7, 8}}, {0, 1}, markers));
  out[0].push_back(make_unit(rng, "t2", {{5, 6}}, {2}, markers));
  out[1].push_back(make_unit(rng, "t3", {{8, 4}, {7}}, {1, 0}, markers));
  return out;
}

inline std::vector<const data::ConversationUnits*> pointers(const std::vector<data::ConversationUnits>& u) {
  std::vector<const data::ConversationUnits*> out;
  for (const auto& c : u) out.push_back(&c);
  return out;
}

}  // namespace s2da::testing
