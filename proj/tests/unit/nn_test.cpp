#include <cmath>
#include <random>

#include "doctest.h"
#include "s2da/nn/attention.hpp"
#include "s2da/nn/layers.hpp"
#include "support/gradcheck.hpp"

using namespace s2da;
using ad::Graph;
using ad::Parameter;
using ad::ParameterStore;
using ad::Shape;
using ad::Tensor;
using ad::Var;
using s2da::testing::check_gradients;

namespace {

Tensor random_tensor(std::mt19937_64& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor t = Tensor::zeros(r, c);
  for (double& v : t.data()) v = n(rng);
  return t;
}

// Larger-than-default weights so gradient checks exercise non-linear regimes.
void perturb_all(ParameterStore& store, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  for (Parameter* p : store.all()) {
    for (double& v : p->value.data()) v = n(rng);
  }
}

Tensor reversed_rows(const Tensor& t) {
  Tensor out = t;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) out.at(r, c) = t.at(t.rows() - 1 - r, c);
  }
  return out;
}

}  // namespace

TEST_CASE("lstm step with zero weights and input yields zero state") {
  ParameterStore store;
  nn::LstmCell cell(store, "cell", 3, 4);
  for (Parameter* p : store.all()) p->value.fill(0.0);
  Graph g;
  auto s = cell.step(g, g.constant(Tensor::zeros(1, 3)), cell.initial_state(g));
  for (double v : s.h.value().data()) CHECK(v == 0.0);
  for (double v : s.c.value().data()) CHECK(v == 0.0);
}

TEST_CASE("saturated forget gate keeps the previous cell state") {
  std::mt19937_64 rng(1);
  ParameterStore store(1);
  const std::size_t hidden = 5;
  nn::LstmCell cell(store, "cell", 3, hidden);
  auto& b = cell.bias().value;
  for (std::size_t j = hidden; j < 2 * hidden; ++j) b[j] = 50.0;
  Graph g;
  nn::LstmState prev{g.constant(random_tensor(rng, 1, hidden, 0.5)),
                     g.constant(random_tensor(rng, 1, hidden, 2.0))};
  Var x = g.constant(random_tensor(rng, 1, 3));
  auto next = cell.step(g, x, prev);

  // Expected c' = c + i*g with the same gate pre-activations.
  Var z = cell.project_inputs(g, x) + ad::matmul(prev.h, g.param(cell.hidden_weight()));
  for (std::size_t j = 0; j < hidden; ++j) {
    const double i_gate = 1.0 / (1.0 + std::exp(-z.value()[j]));
    const double cand = std::tanh(z.value()[2 * hidden + j]);
    const double expected = prev.c.value()[j] + i_gate * cand;
    CHECK(next.c.value()[j] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("lstm hidden outputs are bounded by one") {
  std::mt19937_64 rng(2);
  ParameterStore store(2);
  nn::LstmCell cell(store, "cell", 4, 6);
  perturb_all(store, rng, 3.0);
  Graph g;
  auto hs = cell.run(g, g.constant(random_tensor(rng, 20, 4, 5.0)), cell.initial_state(g), false);
  for (Var h : hs) {
    for (double v : h.value().data()) CHECK(std::abs(v) <= 1.0);
  }
}

TEST_CASE("lstm gradient check") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CAPTURE(seed);
    std::mt19937_64 rng(seed);
    ParameterStore store(seed);
    nn::LstmCell cell(store, "cell", 3, 4);
    Parameter& x = store.add("x", Shape{5, 3}, ad::Init::kZeros);
    perturb_all(store, rng, 0.6);
    auto res = check_gradients(store, [&](Graph& g) {
      auto hs = cell.run(g, g.param(x), cell.initial_state(g), false);
      return ad::sum(ad::tanh(ad::concat_rows(hs)));
    });
    CHECK_MESSAGE(res.max_rel_error <= 1e-4, res.worst);
  }
}

TEST_CASE("bilstm shapes, subsampling and gradient check") {
  SUBCASE("single frame, one layer") {
    ParameterStore store;
    nn::BiLstmEncoder enc(store, "enc", 3, 4, 1, {});
    Graph g;
    auto out = enc(g, g.constant(Tensor::zeros(1, 3)));
    CHECK(out.length() == 1);
    CHECK(out.hidden.cols() == 8);
  }
  SUBCASE("T=8 with factor 2 after layer 1") {
    ParameterStore store;
    nn::BiLstmEncoder enc(store, "enc", 3, 4, 2, {2, 1});
    Graph g;
    auto out = enc(g, g.constant(Tensor::zeros(8, 3)));
    CHECK(out.length() == 4);
    CHECK(enc.output_length(8) == 4);
    CHECK(enc.output_length(9) == 5);
  }
  SUBCASE("gradient check through stacked layers with subsampling") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      CAPTURE(seed);
      std::mt19937_64 rng(seed + 100);
      ParameterStore store(seed);
      nn::BiLstmEncoder enc(store, "enc", 2, 3, 2, {2, 1});
      Parameter& x = store.add("x", Shape{5, 2}, ad::Init::kZeros);
      perturb_all(store, rng, 0.6);
      auto res = check_gradients(store, [&](Graph& g) {
        auto out = enc(g, g.param(x));
        return ad::sum(ad::tanh(out.hidden));
      });
      CHECK_MESSAGE(res.max_rel_error <= 1e-4, res.worst);
    }
  }
}

TEST_CASE("bilstm reversal symmetry with mirrored weights") {
  std::mt19937_64 rng(9);
  ParameterStore store(9);
  nn::BiLstm layer(store, "bi", 3, 4);
  perturb_all(store, rng, 0.5);
  // Make the backward cell an exact copy of the forward cell.
  layer.backward_cell().input_weight().value = layer.forward_cell().input_weight().value;
  layer.backward_cell().hidden_weight().value = layer.forward_cell().hidden_weight().value;
  layer.backward_cell().bias().value = layer.forward_cell().bias().value;

  const Tensor x = random_tensor(rng, 6, 3);
  Graph g;
  const Tensor out = layer(g, g.constant(x)).sequence.value();
  const Tensor out_rev = layer(g, g.constant(reversed_rows(x))).sequence.value();
  for (std::size_t t = 0; t < 6; ++t) {
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(out.at(t, j) == out_rev.at(5 - t, 4 + j));
      CHECK(out.at(t, 4 + j) == out_rev.at(5 - t, j));
    }
  }
}

TEST_CASE("attention over a single encoder frame") {
  ParameterStore store(4);
  nn::LocationAwareAttention attn(store, "attn", 3, 4, {.attention_dim = 5});
  Graph g;
  nn::EncoderState enc{g.constant(Tensor::row({0.1, 0.2, 0.3, 0.4}))};
  auto keys = attn.prepare(g, enc);
  auto r = attn(g, g.constant(Tensor::row({1, 2, 3})), keys, attn.initial_weights(g, 1));
  CHECK(r.weights.value()[0] == 1.0);
  CHECK(r.context.value() == enc.hidden.value());
}

TEST_CASE("identical encoder states and zero location kernel give uniform weights") {
  std::mt19937_64 rng(5);
  ParameterStore store(5);
  nn::LocationAwareAttention attn(store, "attn", 3, 4, {.attention_dim = 6});
  store.get("attn.conv").value.fill(0.0);
  Tensor h = Tensor::zeros(7, 4);
  for (std::size_t t = 0; t < 7; ++t) {
    for (std::size_t j = 0; j < 4; ++j) h.at(t, j) = 0.3 * static_cast<double>(j) - 0.2;
  }
  Graph g;
  auto keys = attn.prepare(g, {g.constant(h)});
  Tensor prev = Tensor::zeros(1, 7);
  prev[2] = 1.0;
  auto r = attn(g, g.constant(random_tensor(rng, 1, 3)), keys, g.constant(prev));
  for (double w : r.weights.value().data()) CHECK(w == doctest::Approx(1.0 / 7.0).epsilon(1e-14));
}

TEST_CASE("attention weights normalize and mismatched lengths are rejected") {
  std::mt19937_64 rng(6);
  ParameterStore store(6);
  nn::LocationAwareAttention attn(store, "attn", 3, 4, {.attention_dim = 6});
  perturb_all(store, rng, 1.0);
  Graph g;
  auto keys = attn.prepare(g, {g.constant(random_tensor(rng, 9, 4))});
  Var prev = attn.initial_weights(g, 9);
  for (int step = 0; step < 5; ++step) {
    auto r = attn(g, g.constant(random_tensor(rng, 1, 3)), keys, prev);
    double s = 0.0;
    for (double w : r.weights.value().data()) {
      CHECK(w >= 0.0);
      s += w;
    }
    CHECK(std::abs(s - 1.0) <= 1e-9);
    prev = r.weights;
  }
  CHECK_THROWS_AS(attn(g, g.constant(random_tensor(rng, 1, 3)), keys, attn.initial_weights(g, 8)),
                  std::invalid_argument);
}

TEST_CASE("attention context gradient check over two chained steps") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CAPTURE(seed);
    std::mt19937_64 rng(seed + 200);
    ParameterStore store(seed);
    nn::LocationAwareAttention attn(store, "attn", 3, 4,
                                    {.attention_dim = 5, .conv_width = 3, .conv_channels = 2});
    Parameter& h = store.add("h", Shape{6, 4}, ad::Init::kZeros);
    Parameter& q = store.add("q", Shape{2, 3}, ad::Init::kZeros);
    perturb_all(store, rng, 0.7);
    auto res = check_gradients(store, [&](Graph& g) {
      auto keys = attn.prepare(g, {g.param(h)});
      Var qs = g.param(q);
      auto r1 = attn(g, g.slice_rows(qs, 0, 1), keys, attn.initial_weights(g, 6));
      auto r2 = attn(g, g.slice_rows(qs, 1, 2), keys, r1.weights);
      return ad::sum(ad::tanh(r1.context + r2.context));
    });
    CHECK_MESSAGE(res.max_rel_error <= 1e-4, res.worst);
  }
}

TEST_CASE("dense and embedding gradient check") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CAPTURE(seed);
    std::mt19937_64 rng(seed + 300);
    ParameterStore store(seed);
    nn::Embedding emb(store, "emb", 7, 4);
    nn::Dense dense(store, "dense", 4, 3);
    perturb_all(store, rng, 0.8);
    const std::vector<int> ids{3, 0, 3, 6};
    const std::vector<int> targets{1, 2, 0, 1};
    auto res = check_gradients(store, [&](Graph& g) {
      return g.cross_entropy(dense(g, emb(g, ids)), targets, ad::Reduction::kMean);
    });
    CHECK_MESSAGE(res.max_rel_error <= 1e-4, res.worst);
  }
}
