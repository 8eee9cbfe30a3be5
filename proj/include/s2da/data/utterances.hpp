#pragma once

#include <string>
#include <vector>

#include "s2da/data/corpus.hpp"

namespace s2da::data {

/// How a corpus is cut into recognition units.
enum class UnitKind {
  kSegment,             // one DA segment; needs segment frame spans
  kTurn,                // whole turn, words only
  kTurnWithBoundaries,  // whole turn, <da_end> after every segment
};

/// Word positions [begin, end) within the unit's word sequence (markers excluded).
struct SegmentLabel {
  std::size_t begin = 0;
  std::size_t end = 0;
  TagId tag = 0;
  friend bool operator==(const SegmentLabel&, const SegmentLabel&) = default;
};

struct Utterance {
  std::string id;
  std::string conversation_id;
  ad::Tensor frames;
  /// Token ids ending in <eos>.
  std::vector<TokenId> targets;
  std::vector<SegmentLabel> segments;

  /// Target word ids without <eos> and <da_end>.
  std::vector<TokenId> words() const;
};

using ConversationUnits = std::vector<Utterance>;

/// Units of every conversation in `split`, in corpus order.
std::vector<ConversationUnits> build_units(const Corpus& corpus, Split split, UnitKind kind);

/// Index of the last word of every segment, the boundary set used by
/// segmentation metrics.
std::vector<std::size_t> boundary_ends(const std::vector<SegmentLabel>& segments);

}  // namespace s2da::data
