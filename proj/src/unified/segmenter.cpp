#include "s2da/unified/segmenter.hpp"

#include <stdexcept>

#include "s2da/autodiff/optimizer.hpp"

namespace s2da::unified {

TextSegmenter::TextSegmenter(ad::ParameterStore& store, const SegmenterConfig& config,
                             const std::string& prefix)
    : config_(config),
      embedding_(store, prefix + ".embedding", config.vocab_size, config.embedding_dim),
      encoder_(store, prefix + ".encoder", config.embedding_dim, config.hidden, config.layers,
               std::vector<std::size_t>(config.layers, 1)),
      output_(store, prefix + ".output", encoder_.output_size(), 2) {}

ad::Var TextSegmenter::logits(ad::Graph& g, std::span<const TokenId> words) const {
  if (words.empty()) throw std::invalid_argument("segmenter: empty word sequence");
  const auto enc = encoder_(g, embedding_(g, words));
  return output_(g, enc.hidden);
}

ad::Var TextSegmenter::loss(ad::Graph& g, std::span<const TokenId> words,
                            const metrics::BoundarySet& ends) const {
  std::vector<int> labels(words.size(), 0);
  for (std::size_t e : ends) {
    if (e >= words.size()) throw std::invalid_argument("segmenter: boundary past the last word");
    labels[e] = 1;
  }
  return g.cross_entropy(logits(g, words), labels, ad::Reduction::kSum);
}

metrics::BoundarySet TextSegmenter::predict(std::span<const TokenId> words) const {
  if (words.empty()) return {0};
  ad::Graph g;
  const auto& z = logits(g, words).value();
  metrics::BoundarySet out;
  for (std::size_t i = 0; i + 1 < words.size(); ++i) {
    if (z.at(i, 1) > z.at(i, 0)) out.push_back(i);
  }
  out.push_back(words.size() - 1);
  return out;
}

TrainingHistory train_segmenter(TextSegmenter& segmenter, ad::ParameterStore& store,
                                const std::vector<data::ConversationUnits>& units,
                                const TrainingConfig& config, const TrainingLog& log) {
  config.validate();
  std::vector<const data::Utterance*> items;
  std::vector<std::size_t> lengths;
  for (const auto& c : units) {
    for (const auto& u : c) {
      items.push_back(&u);
      lengths.push_back(u.targets.size());
    }
  }
  if (items.empty()) throw std::invalid_argument("train_segmenter: no training units");
  data::BatchIterator batches(lengths, config.batch_size, config.seed, config.bucketing);
  ad::Adam adam(ad::AdamOptions{config.learning_rate});
  TrainingHistory hist;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double total = 0, words = 0;
    for (const auto& idx : batches.epoch(epoch)) {
      ad::Graph g;
      std::vector<ad::Var> parts;
      double n = 0;
      for (std::size_t i : idx) {
        const auto w = items[i]->words();
        parts.push_back(segmenter.loss(g, w, data::boundary_ends(items[i]->segments)));
        n += static_cast<double>(w.size());
      }
      const ad::Var loss = ad::scale(parts.size() == 1 ? parts.front() : ad::sum(ad::concat_rows(parts)), 1.0 / n);
      store.zero_grad();
      g.backward(loss);
      ad::clip_grad_norm(store, config.clip_norm);
      adam.step(store);
      ++hist.steps;
      total += loss.value()[0] * n;
      words += n;
    }
    hist.epoch_loss.push_back(total / words);
    if (log) log({{"phase", "segmenter"}, {"epoch", epoch}, {"loss", hist.epoch_loss.back()}, {"steps", hist.steps}});
  }
  return hist;
}

}  // namespace s2da::unified
