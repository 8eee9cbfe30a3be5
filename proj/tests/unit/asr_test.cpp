#include <cmath>
#include <map>
#include <random>

#include "doctest.h"
#include "s2da/asr/model.hpp"
#include "s2da/autodiff/optimizer.hpp"
#include "support/gradcheck.hpp"
#include "support/toy_scorer.hpp"

using namespace s2da;
using namespace s2da::asr;
using ad::Tensor;
using s2da::testing::check_gradients;

namespace {

AsrConfig micro_config(std::size_t vocab = 7) {
  AsrConfig c;
  c.feature_dim = 3;
  c.vocab_size = vocab;
  c.encoder_hidden = 3;
  c.encoder_layers = 2;
  c.subsample = {2, 1};
  c.embedding_dim = 3;
  c.decoder_hidden = 4;
  c.attention = {3, 3, 2};
  return c;
}

Tensor random_frames(std::mt19937_64& rng, std::size_t t, std::size_t d) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor f = Tensor::zeros(t, d);
  for (double& v : f.data()) v = n(rng);
  return f;
}

void perturb(ParameterStore& store, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  for (auto* p : store.all()) {
    for (double& v : p->value.data()) v += n(rng);
  }
}

/// Three emit-able tokens (end=1, a=2, b=3) with hand-set probabilities.
struct TableScorer {
  using State = std::vector<TokenId>;
  std::size_t vocab_size() const { return 4; }
  TokenId start_token() const { return 0; }
  TokenId end_token() const { return 1; }
  State initial_state() const { return {}; }
  std::vector<double> log_probs(const State& p) const {
    std::vector<double> probs;
    if (p.empty()) probs = {0, 0.1, 0.6, 0.3};
    else if (p == State{2}) probs = {0, 0.7, 0.1, 0.2};
    else if (p == State{3}) probs = {0, 0.9, 0.05, 0.05};
    else probs = {0, 0.8, 0.1, 0.1};
    std::vector<double> out;
    for (double q : probs) out.push_back(q == 0 ? -INFINITY : std::log(q));
    return out;
  }
  ScoredStep<State> step(const State& p, TokenId prev) const {
    State n = p;
    if (prev != 0) n.push_back(prev);
    return {n, log_probs(n), {0.0}};
  }
};

}  // namespace

TEST_CASE("decode step produces a distribution and rejects bad ids") {
  ParameterStore store(1);
  AsrModel model(store, micro_config());
  std::mt19937_64 rng(2);
  Graph g;
  const auto enc = model.encode(g, random_frames(rng, 5, 3));
  CHECK(enc.length == 3);
  const auto step = model.decode_step(g, enc, model.initial_state(g, enc), Vocabulary::kSos);
  const auto probs = ad::softmax(step.logits).value();
  double total = 0;
  for (double p : probs.data()) total += p;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(step.output.cols() == model.feature_size());
  CHECK_THROWS_AS(model.decode_step(g, enc, step.state, 7), std::invalid_argument);
  CHECK_THROWS_AS(model.decode_step(g, enc, step.state, -1), std::invalid_argument);
}

TEST_CASE("teacher-forced loss closed forms") {
  ParameterStore store(3);
  AsrModel model(store, micro_config(5));
  auto& w = store.get("asr.output.W");
  auto& b = store.get("asr.output.b");
  w.value.fill(0.0);
  std::mt19937_64 rng(4);
  const Tensor frames = random_frames(rng, 4, 3);

  SUBCASE("uniform logits give ln V per token") {
    b.value.fill(0.0);
    Graph g;
    const std::vector<TokenId> targets{4, 4, Vocabulary::kEos};
    const auto tf = model.teacher_force(g, frames, targets);
    CHECK(tf.loss_sum.value()[0] / 3 == doctest::Approx(std::log(5.0)).epsilon(1e-14));
  }
  SUBCASE("a saturated single-word vocabulary has vanishing loss") {
    b.value.fill(0.0);
    b.value[Vocabulary::kEos] = 30.0;
    Graph g;
    const std::vector<TokenId> targets{Vocabulary::kEos};
    const auto tf = model.teacher_force(g, frames, targets);
    CHECK(tf.loss_sum.value()[0] == doctest::Approx(std::log1p(4 * std::exp(-30.0))).epsilon(1e-9));
    CHECK(tf.loss_sum.value()[0] < 1e-12);
  }
  SUBCASE("targets must end in <eos>") {
    Graph g;
    const std::vector<TokenId> targets{4};
    CHECK_THROWS_AS(model.teacher_force(g, frames, targets), std::invalid_argument);
  }
}

TEST_CASE("teacher-forced loss matches stepwise decoding") {
  ParameterStore store(5);
  AsrModel model(store, micro_config());
  std::mt19937_64 rng(6);
  perturb(store, rng, 0.3);
  const Tensor frames = random_frames(rng, 6, 3);
  const std::vector<TokenId> targets{4, 6, 5, Vocabulary::kEos};
  Graph g;
  const auto tf = model.teacher_force(g, frames, targets);
  const auto enc = model.encode(g, frames);
  auto state = model.initial_state(g, enc);
  TokenId prev = Vocabulary::kSos;
  double loss = 0;
  for (std::size_t l = 0; l < targets.size(); ++l) {
    const auto step = model.decode_step(g, enc, state, prev);
    const auto lp = ad::log_softmax(step.logits.value().data());
    loss -= lp[static_cast<std::size_t>(targets[l])];
    for (std::size_t k = 0; k < model.feature_size(); ++k) {
      CHECK(step.output.value()[k] == doctest::Approx(tf.features.value().at(l, k)).epsilon(1e-12));
    }
    state = step.state;
    prev = targets[l];
  }
  CHECK(tf.loss_sum.value()[0] == doctest::Approx(loss).epsilon(1e-12));
}

TEST_CASE("full ASR graph passes finite-difference checks") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ParameterStore store(seed);
    AsrModel model(store, micro_config());
    std::mt19937_64 rng(seed + 100);
    perturb(store, rng, 0.4);
    const Tensor frames = random_frames(rng, 4 + seed % 3, 3);
    const std::vector<TokenId> targets{4, 5, Vocabulary::kEos};
    const auto r = check_gradients(store, [&](Graph& g) {
      const Tensor* f[] = {&frames};
      const std::vector<TokenId>* t[] = {&targets};
      return asr_batch_loss(g, model, f, t).loss;
    });
    CAPTURE(seed);
    CAPTURE(r.worst);
    CHECK(r.max_rel_error <= 1e-4);
  }
}

TEST_CASE("batch loss is the mean over all tokens") {
  ParameterStore store(8);
  AsrModel model(store, micro_config());
  std::mt19937_64 rng(9);
  const Tensor f1 = random_frames(rng, 5, 3), f2 = random_frames(rng, 3, 3);
  const std::vector<TokenId> t1{4, Vocabulary::kEos}, t2{5, 6, 4, Vocabulary::kEos};
  Graph g;
  const Tensor* f[] = {&f1, &f2};
  const std::vector<TokenId>* t[] = {&t1, &t2};
  const auto batch = asr_batch_loss(g, model, f, t);
  const double expected = (model.teacher_force(g, f1, t1).loss_sum.value()[0] +
                           model.teacher_force(g, f2, t2).loss_sum.value()[0]) / 6.0;
  CHECK(batch.loss.value()[0] == doctest::Approx(expected).epsilon(1e-14));
  CHECK(batch.tokens == 6);
  CHECK_THROWS_AS(asr_batch_loss(g, model, std::span<const Tensor* const>{},
                                 std::span<const std::vector<TokenId>* const>{}),
                  std::invalid_argument);
}

TEST_CASE("beam search matches exhaustive enumeration when nothing is pruned") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    for (std::size_t vocab : {3u, 4u}) {
      for (std::size_t max_len : {1u, 2u, 3u, 4u}) {
        s2da::testing::ToyScorer scorer(vocab, seed);
        const double gamma = seed % 2 == 0 ? 1.0 : 0.5;
        const auto all = s2da::testing::enumerate_all(scorer, max_len, gamma);
        std::size_t width = 1;
        for (std::size_t i = 0; i < max_len; ++i) width *= vocab;
        const std::size_t n = std::min<std::size_t>(5, all.size());
        const auto beam = beam_search(scorer, BeamOptions{width, n, gamma, max_len});
        REQUIRE(beam.size() == n);
        for (std::size_t i = 0; i < n; ++i) {
          CHECK(beam[i].tokens == all[i].tokens);
          CHECK(beam[i].log_score == all[i].log_score);
          CHECK(beam[i].features.size() == beam[i].tokens.size());
        }
      }
    }
  }
}

TEST_CASE("hand-set three-word model with beam width two") {
  TableScorer scorer;
  const auto all = s2da::testing::enumerate_all(scorer, 3, 1.0);
  const auto beam = beam_search(scorer, BeamOptions{2, 2, 1.0, 3});
  REQUIRE(beam.size() == 2);
  CHECK(beam[0].tokens == std::vector<TokenId>{2, 1});
  CHECK(beam[1].tokens == std::vector<TokenId>{3, 1});
  CHECK(beam[0].tokens == all[0].tokens);
  CHECK(beam[1].tokens == all[1].tokens);
  CHECK(beam[0].log_score == doctest::Approx(std::log(0.42)));
  CHECK(beam[0].normalized_score >= beam[1].normalized_score);
  CHECK_THROWS_AS(beam_search(scorer, BeamOptions{0, 1, 1.0, 3}), std::invalid_argument);
  CHECK_THROWS_AS(beam_search(scorer, BeamOptions{2, 3, 1.0, 3}), std::invalid_argument);
}

TEST_CASE("width-one beam equals greedy on random models") {
  std::size_t compared = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ParameterStore store(seed);
    AsrModel model(store, micro_config(9));
    std::mt19937_64 rng(seed);
    perturb(store, rng, 0.8);
    for (int u = 0; u < 10; ++u) {
      const Tensor frames = random_frames(rng, 3 + static_cast<std::size_t>(u), 3);
      const auto greedy = model.greedy_decode(frames);
      const auto beam = model.beam_decode(frames, BeamOptions{1, 1, 1.0, 0});
      REQUIRE(beam.size() == 1);
      CHECK(beam[0].tokens == greedy.tokens);
      CHECK(beam[0].features == greedy.features);
      CHECK(greedy.features.size() == greedy.tokens.size());
      CHECK(model.greedy_decode(frames).tokens == greedy.tokens);
      ++compared;
    }
  }
  CHECK(compared == 100);
}

TEST_CASE("beam results are sorted and carry one feature per token") {
  ParameterStore store(12);
  AsrModel model(store, micro_config(9));
  std::mt19937_64 rng(12);
  perturb(store, rng, 0.8);
  const auto hyps = model.beam_decode(random_frames(rng, 8, 3), BeamOptions{5, 5, 1.0, 0});
  REQUIRE(!hyps.empty());
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    CHECK(hyps[i].features.size() == hyps[i].tokens.size());
    CHECK(hyps[i].features.front().size() == model.feature_size());
    if (i > 0) CHECK(hyps[i - 1].normalized_score >= hyps[i].normalized_score);
  }
}

TEST_CASE("training reduces the loss and overfits one utterance") {
  AsrConfig cfg = micro_config(8);
  cfg.encoder_hidden = 8;
  cfg.decoder_hidden = 16;
  cfg.embedding_dim = 8;
  cfg.attention = {8, 5, 4};
  ParameterStore store(21);
  AsrModel model(store, cfg);
  std::mt19937_64 rng(22);
  std::vector<Tensor> frames;
  std::vector<std::vector<TokenId>> targets;
  std::uniform_int_distribution<TokenId> word(4, 7);
  for (int i = 0; i < 10; ++i) {
    frames.push_back(random_frames(rng, 8, 3));
    targets.push_back({word(rng), word(rng), word(rng), Vocabulary::kEos});
  }
  std::vector<const Tensor*> fp;
  std::vector<const std::vector<TokenId>*> tp;
  for (int i = 0; i < 10; ++i) {
    fp.push_back(&frames[static_cast<std::size_t>(i)]);
    tp.push_back(&targets[static_cast<std::size_t>(i)]);
  }

  SUBCASE("loss decreases monotonically over the first 50 Adam steps") {
    ad::Adam adam(ad::AdamOptions{1e-3});
    double previous = INFINITY;
    for (int step = 0; step < 50; ++step) {
      store.zero_grad();
      Graph g;
      const auto batch = asr_batch_loss(g, model, fp, tp);
      g.backward(batch.loss);
      const double loss = batch.loss.value()[0];
      CAPTURE(step);
      CHECK(loss < previous);
      previous = loss;
      adam.step(store);
    }
  }
  SUBCASE("a single utterance is transcribed exactly after overfitting") {
    ad::Adam adam(ad::AdamOptions{1e-2});
    const Tensor* f1[] = {fp[0]};
    const std::vector<TokenId>* t1[] = {tp[0]};
    for (int step = 0; step < 150; ++step) {
      store.zero_grad();
      Graph g;
      const auto batch = asr_batch_loss(g, model, f1, t1);
      g.backward(batch.loss);
      adam.step(store);
    }
    CHECK(model.greedy_decode(frames[0]).tokens == targets[0]);
  }
}
