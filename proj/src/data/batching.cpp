#include "s2da/data/batching.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

namespace s2da::data {

namespace {
constexpr std::size_t kBucketWindow = 50;
}

BatchIterator::BatchIterator(std::vector<std::size_t> lengths, std::size_t batch_size,
                             std::uint64_t seed, bool bucketing)
    : lengths_(std::move(lengths)), batch_size_(batch_size), seed_(seed), bucketing_(bucketing) {
  if (batch_size_ < 1) throw std::invalid_argument("batch size must be at least 1");
}

std::vector<std::vector<std::size_t>> BatchIterator::epoch(std::size_t epoch) const {
  std::seed_seq seq{static_cast<std::uint64_t>(seed_), static_cast<std::uint64_t>(epoch)};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> order(lengths_.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  if (bucketing_) {
    const std::size_t window = kBucketWindow * batch_size_;
    for (std::size_t start = 0; start < order.size(); start += window) {
      const auto first = order.begin() + static_cast<std::ptrdiff_t>(start);
      const auto last = order.begin() + static_cast<std::ptrdiff_t>(std::min(start + window, order.size()));
      std::stable_sort(first, last, [&](std::size_t a, std::size_t b) {
        return lengths_[a] < lengths_[b];
      });
    }
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size_) {
    const std::size_t end = std::min(start + batch_size_, order.size());
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  if (bucketing_) std::shuffle(batches.begin(), batches.end(), rng);
  return batches;
}

std::size_t PaddedBatch::frame_count(std::size_t b) const {
  std::size_t n = 0;
  for (std::size_t t = 0; t < frame_mask.cols(); ++t) n += frame_mask.at(b, t) != 0.0;
  return n;
}

std::size_t PaddedBatch::target_count(std::size_t b) const {
  std::size_t n = 0;
  for (std::size_t t = 0; t < target_mask.cols(); ++t) n += target_mask.at(b, t) != 0.0;
  return n;
}

ad::Tensor PaddedBatch::unpadded_frames(std::size_t b) const {
  const std::size_t t_max = frames.shape()[1], d = frames.shape()[2];
  const std::size_t n = frame_count(b);
  const auto src = frames.data().subspan(b * t_max * d, n * d);
  return ad::Tensor::matrix(n, d, std::vector<double>(src.begin(), src.end()));
}

std::vector<TokenId> PaddedBatch::unpadded_targets(std::size_t b) const {
  const std::size_t n = target_count(b);
  return std::vector<TokenId>(targets[b].begin(), targets[b].begin() + static_cast<std::ptrdiff_t>(n));
}

PaddedBatch make_padded_batch(std::span<const Utterance* const> items,
                              std::span<const std::size_t> indices, double pad_value) {
  if (items.empty() || items.size() != indices.size()) {
    throw std::invalid_argument("padded batch needs one index per non-empty item list");
  }
  std::size_t t_max = 0, l_max = 0;
  const std::size_t d = items.front()->frames.cols();
  for (const Utterance* u : items) {
    if (u->frames.cols() != d) throw std::invalid_argument("batch mixes feature dimensions");
    t_max = std::max(t_max, u->frames.rows());
    l_max = std::max(l_max, u->targets.size());
  }
  PaddedBatch batch;
  const std::size_t B = items.size();
  batch.frames = ad::Tensor(ad::Shape{B, t_max, d}, pad_value);
  batch.frame_mask = ad::Tensor::zeros(B, t_max);
  batch.target_mask = ad::Tensor::zeros(B, l_max);
  batch.indices.assign(indices.begin(), indices.end());
  for (std::size_t b = 0; b < B; ++b) {
    const Utterance& u = *items[b];
    std::copy(u.frames.data().begin(), u.frames.data().end(),
              batch.frames.data().begin() + static_cast<std::ptrdiff_t>(b * t_max * d));
    for (std::size_t t = 0; t < u.frames.rows(); ++t) batch.frame_mask.at(b, t) = 1.0;
    std::vector<TokenId> tgt(l_max, -1);
    std::copy(u.targets.begin(), u.targets.end(), tgt.begin());
    for (std::size_t l = 0; l < u.targets.size(); ++l) batch.target_mask.at(b, l) = 1.0;
    batch.targets.push_back(std::move(tgt));
  }
  return batch;
}

}  // namespace s2da::data
