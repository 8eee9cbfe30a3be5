#include "s2da/data/utterances.hpp"

#include <algorithm>

namespace s2da::data {

std::vector<TokenId> Utterance::words() const {
  std::vector<TokenId> out;
  for (TokenId t : targets) {
    if (t != Vocabulary::kEos && t != Vocabulary::kDaEnd) out.push_back(t);
  }
  return out;
}

namespace {

ad::Tensor slice_frames(const ad::Tensor& frames, std::size_t begin, std::size_t end) {
  const std::size_t d = frames.cols();
  std::vector<double> data(frames.data().begin() + static_cast<std::ptrdiff_t>(begin * d),
                           frames.data().begin() + static_cast<std::ptrdiff_t>(end * d));
  return ad::Tensor::matrix(end - begin, d, std::move(data));
}

}  // namespace

std::vector<ConversationUnits> build_units(const Corpus& corpus, Split split, UnitKind kind) {
  std::vector<ConversationUnits> out;
  for (const Conversation* conv : corpus.conversations_in(split)) {
    ConversationUnits units;
    for (const Turn& turn : conv->turns) {
      if (turn.features.empty()) {
        throw CorpusError("turn " + turn.turn_id + " has no acoustic features");
      }
      if (kind == UnitKind::kSegment) {
        for (std::size_t s = 0; s < turn.segments.size(); ++s) {
          const auto& seg = turn.segments[s];
          if (!seg.frames) {
            throw CorpusError("turn " + turn.turn_id +
                              " lacks segment frame spans needed for segment units");
          }
          Utterance u;
          u.id = turn.turn_id + "_s" + std::to_string(s);
          u.conversation_id = conv->id;
          u.frames = slice_frames(turn.features.frames, seg.frames->begin, seg.frames->end);
          for (const auto& w : seg.words) u.targets.push_back(corpus.vocab.id(w));
          u.targets.push_back(Vocabulary::kEos);
          u.segments.push_back({0, seg.words.size(), corpus.tags.id(seg.da_tag)});
          units.push_back(std::move(u));
        }
        continue;
      }
      Utterance u;
      u.id = turn.turn_id;
      u.conversation_id = conv->id;
      u.frames = turn.features.frames;
      std::size_t pos = 0;
      for (const auto& seg : turn.segments) {
        for (const auto& w : seg.words) u.targets.push_back(corpus.vocab.id(w));
        if (kind == UnitKind::kTurnWithBoundaries) u.targets.push_back(Vocabulary::kDaEnd);
        u.segments.push_back({pos, pos + seg.words.size(), corpus.tags.id(seg.da_tag)});
        pos += seg.words.size();
      }
      u.targets.push_back(Vocabulary::kEos);
      units.push_back(std::move(u));
    }
    out.push_back(std::move(units));
  }
  return out;
}

std::vector<std::size_t> boundary_ends(const std::vector<SegmentLabel>& segments) {
  std::vector<std::size_t> out;
  for (const auto& s : segments) out.push_back(s.end - 1);
  return out;
}

}  // namespace s2da::data
