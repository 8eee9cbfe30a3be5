#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "s2da/data/utterances.hpp"

namespace s2da::data {

/// Deterministic epoch orders over a fixed set of items. With bucketing,
/// items are shuffled, grouped into windows of 50 batches, sorted by length
/// inside each window, cut into batches, and the batches shuffled again.
class BatchIterator {
 public:
  BatchIterator(std::vector<std::size_t> lengths, std::size_t batch_size, std::uint64_t seed,
                bool bucketing);

  /// Index lists of each batch in `epoch`. Every item appears exactly once.
  std::vector<std::vector<std::size_t>> epoch(std::size_t epoch) const;

  std::size_t size() const { return lengths_.size(); }
  std::size_t batch_size() const { return batch_size_; }

 private:
  std::vector<std::size_t> lengths_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  bool bucketing_;
};

/// Utterances padded to a common length. Frames are [B, T_max, D]; padded
/// target positions hold -1 and a mask value of 0.
struct PaddedBatch {
  ad::Tensor frames;
  ad::Tensor frame_mask;  // [B, T_max]
  std::vector<std::vector<TokenId>> targets;
  ad::Tensor target_mask;  // [B, L_max]
  std::vector<std::size_t> indices;

  std::size_t size() const { return indices.size(); }
  std::size_t frame_count(std::size_t b) const;
  std::size_t target_count(std::size_t b) const;
  /// The unpadded [T_b, D] frames of item b.
  ad::Tensor unpadded_frames(std::size_t b) const;
  /// The unpadded target ids of item b.
  std::vector<TokenId> unpadded_targets(std::size_t b) const;
};

/// `pad_value` fills padded frame cells; it must never influence a loss.
PaddedBatch make_padded_batch(std::span<const Utterance* const> items,
                              std::span<const std::size_t> indices, double pad_value = 0.0);

}  // namespace s2da::data
