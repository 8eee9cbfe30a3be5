#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "s2da/autodiff/checkpoint.hpp"
#include "s2da/autodiff/graph.hpp"
#include "s2da/autodiff/optimizer.hpp"
#include "support/gradcheck.hpp"

using namespace s2da::ad;
using s2da::testing::check_gradients;

namespace {

Tensor random_tensor(std::mt19937_64& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor t = Tensor::zeros(r, c);
  for (double& v : t.data()) v = n(rng);
  return t;
}

void fill_random(Parameter& p, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  for (double& v : p.value.data()) v = n(rng);
}

}  // namespace

TEST_CASE("softmax of uniform logits is uniform") {
  Graph g;
  Var y = g.softmax(g.constant(Tensor::row({0, 0, 0})));
  for (double v : y.value().data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("softmax rows sum to one and stay inside (0,1)") {
  std::mt19937_64 rng(7);
  Graph g;
  Var y = g.softmax(g.constant(random_tensor(rng, 5, 9, 4.0)));
  for (std::size_t r = 0; r < 5; ++r) {
    double s = 0.0;
    for (double v : y.value().row_span(r)) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
}

TEST_CASE("matmul with identity returns the vector") {
  Graph g;
  Var eye = g.constant(Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  Var v = g.constant(Tensor::matrix(3, 1, {0.5, -2.0, 7.25}));
  Var out = matmul(eye, v);
  CHECK(out.value() == v.value());
}

TEST_CASE("cross-entropy of a saturated row matches softplus(-20)") {
  Graph g;
  std::vector<int> target{0};
  Var loss = g.cross_entropy(g.constant(Tensor::row({10, -10})), target, Reduction::kMean);
  const double expected = std::log1p(std::exp(-20.0));
  CHECK(std::abs(loss.value()[0] - expected) / expected < 1e-12);
  CHECK(loss.value()[0] == doctest::Approx(2.06e-9).epsilon(1e-2));
}

TEST_CASE("cross-entropy ignores negative targets") {
  Graph g;
  std::vector<int> masked{1, -1};
  std::vector<int> single{1};
  Var logits = g.constant(Tensor::matrix(2, 3, {0.1, 0.2, 0.3, 99, -99, 5}));
  Var a = g.cross_entropy(logits, masked, Reduction::kSum);
  Var b = g.cross_entropy(g.slice_rows(logits, 0, 1), single, Reduction::kSum);
  CHECK(a.value()[0] == b.value()[0]);
}

TEST_CASE("shape mismatch names the op and both shapes") {
  Graph g;
  Var a = g.constant(Tensor::zeros(2, 3));
  Var b = g.constant(Tensor::zeros(4, 5));
  try {
    (void)matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("matmul") != std::string::npos);
    CHECK(msg.find("[2,3]") != std::string::npos);
    CHECK(msg.find("[4,5]") != std::string::npos);
  }
  CHECK_THROWS_AS((void)(a + b), ShapeError);
  CHECK_THROWS_AS((void)(a * b), ShapeError);
}

TEST_CASE("non-finite forward values are rejected") {
  Graph g;
  Var a = g.constant(Tensor::row({1e308}));
  CHECK_THROWS_AS((void)g.scale(a, 10.0), NumericError);
}

TEST_CASE("backward of sum(w*w) is 2w") {
  ParameterStore store;
  Parameter& w = store.add("w", Shape{1, 2}, Init::kZeros);
  w.value = Tensor::row({1, 2});
  Graph g;
  Var x = g.param(w);
  g.backward(g.sum(x * x));
  CHECK(w.grad[0] == 2.0);
  CHECK(w.grad[1] == 4.0);
}

TEST_CASE("backward requires a scalar loss") {
  Graph g;
  Var a = g.constant(Tensor::row({1, 2}));
  CHECK_THROWS_AS(g.backward(a), ShapeError);
}

TEST_CASE("cross-entropy gradient equals softmax minus one-hot") {
  ParameterStore store;
  Parameter& z = store.add("z", Shape{1, 4}, Init::kZeros);
  z.value = Tensor::row({0.3, -1.2, 2.0, 0.5});
  Graph g;
  std::vector<int> target{2};
  Var logits = g.param(z);
  g.backward(g.cross_entropy(logits, target, Reduction::kMean));
  Graph ref;
  Var p = ref.softmax(ref.constant(z.value));
  for (std::size_t j = 0; j < 4; ++j) {
    const double expected = p.value()[j] - (j == 2 ? 1.0 : 0.0);
    CHECK(z.grad[j] == doctest::Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("unreachable parameters get zero gradient") {
  ParameterStore store;
  Parameter& used = store.add("used", Shape{1, 2}, Init::kXavierUniform);
  Parameter& unused = store.add("unused", Shape{1, 2}, Init::kXavierUniform);
  unused.grad.fill(0.0);
  Graph g;
  (void)g.param(unused);
  g.backward(g.sum(g.tanh(g.param(used))));
  for (double v : unused.grad.data()) CHECK(v == 0.0);
}

TEST_CASE("every primitive passes finite differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CAPTURE(seed);
    std::mt19937_64 rng(seed);
    ParameterStore store(seed);
    Parameter& a = store.add("a", Shape{3, 4}, Init::kZeros);
    Parameter& b = store.add("b", Shape{4, 5}, Init::kZeros);
    Parameter& r = store.add("r", Shape{1, 5}, Init::kZeros);
    Parameter& c = store.add("c", Shape{3, 5}, Init::kZeros);
    Parameter& table = store.add("table", Shape{6, 5}, Init::kZeros);
    for (Parameter* p : store.all()) fill_random(*p, rng, 0.7);
    const std::vector<int> ids{1, 4, 1};
    const std::vector<int> targets{2, -1, 4};
    const std::vector<std::size_t> pick{2, 0, 2};

    auto build = [&](Graph& g) {
      Var x = matmul(g.param(a), g.param(b));                 // [3,5]
      Var y = add_row(x, g.param(r));                          // row broadcast
      Var z = sigmoid(y) * tanh(g.param(c)) + g.param(c);      // mul, add
      Var e = g.embedding(g.param(table), ids);                // [3,5]
      Var s = softmax(z + e);                                  // [3,5]
      Var cat = concat_cols({s, g.slice_cols(z, 1, 3)});       // [3,7]
      Var rows = concat_rows({g.slice_rows(cat, 0, 2), g.select_rows(cat, pick)});  // [5,7]
      Var t = transpose(rows);                                 // [7,5]
      Var u = g.unfold_rows(g.slice_cols(t, 0, 2), 3);         // [7,6]
      Var ce = g.cross_entropy(z, targets, Reduction::kMean);
      return ce + scale(mean(u * u), 0.5) + sum(g.slice_rows(t, 2, 4));
    };
    auto res = check_gradients(store, build);
    CHECK_MESSAGE(res.max_rel_error <= 1e-4, res.worst);
  }
}

TEST_CASE("forward and backward are bitwise deterministic") {
  auto run = [] {
    ParameterStore store(3);
    Parameter& a = store.add("a", Shape{4, 4}, Init::kXavierUniform);
    Graph g;
    Var x = g.param(a);
    Var loss = mean(tanh(matmul(x, x)));
    g.backward(loss);
    return std::make_pair(loss.value(), a.grad);
  };
  CHECK(run() == run());
}

TEST_CASE("parameter init depends only on seed and name") {
  ParameterStore s1(11), s2(11), s3(12);
  s1.add("x", Shape{3, 3}, Init::kUniform008);
  Parameter& y1 = s1.add("y", Shape{3, 3}, Init::kUniform008);
  Parameter& y2 = s2.add("y", Shape{3, 3}, Init::kUniform008);
  Parameter& y3 = s3.add("y", Shape{3, 3}, Init::kUniform008);
  CHECK(y1.value == y2.value);
  CHECK_FALSE(y1.value == y3.value);
  for (double v : y1.value.data()) CHECK(std::abs(v) <= 0.08);
  CHECK_THROWS_AS(s1.add("x", Shape{1, 1}, Init::kZeros), std::invalid_argument);
}

TEST_CASE("sgd step") {
  ParameterStore store;
  Parameter& w = store.add("w", Shape{1, 1}, Init::kZeros);
  w.value[0] = 1.0;
  w.grad[0] = 2.0;
  Sgd(0.1).step(store);
  CHECK(w.value[0] == doctest::Approx(0.8).epsilon(1e-15));

  w.grad[0] = 0.0;
  const double before = w.value[0];
  Sgd(0.1).step(store);
  CHECK(w.value[0] == before);
}

TEST_CASE("adam first step moves each weight by about the learning rate") {
  ParameterStore store;
  Parameter& w = store.add("w", Shape{1, 3}, Init::kZeros);
  w.value = Tensor::row({0.5, -1.0, 2.0});
  w.grad.fill(1.0);
  Adam adam(AdamOptions{.learning_rate = 0.01});
  adam.step(store);
  // m_hat = g, v_hat = g^2  =>  delta = lr * g / (|g| + eps)
  const double delta = 0.01 / (1.0 + 1e-8);
  CHECK(w.value[0] == doctest::Approx(0.5 - delta).epsilon(1e-14));
  CHECK(w.value[1] == doctest::Approx(-1.0 - delta).epsilon(1e-14));
  CHECK(w.value[2] == doctest::Approx(2.0 - delta).epsilon(1e-14));
}

TEST_CASE("optimizers abort on NaN gradient naming the parameter") {
  ParameterStore store;
  Parameter& w = store.add("decoder.W", Shape{1, 2}, Init::kZeros);
  w.grad[1] = std::nan("");
  Adam adam;
  try {
    adam.step(store);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("decoder.W") != std::string::npos);
  }
  CHECK_THROWS_AS(Sgd(0.1).step(store), NumericError);
}

TEST_CASE("frozen parameters are constants in graphs and skipped by optimizers") {
  ParameterStore store;
  Parameter& w = store.add("asr.w", Shape{1, 2}, Init::kXavierUniform);
  Parameter& v = store.add("da.v", Shape{1, 2}, Init::kXavierUniform);
  store.set_frozen("asr.", true);
  const Tensor before = w.value;
  store.zero_grad();
  Graph g;
  g.backward(sum(g.param(w) * g.param(v)));
  for (double x : w.grad.data()) CHECK(x == 0.0);
  Adam adam;
  adam.step(store);
  CHECK(w.value == before);
}

TEST_CASE("clip_grad_norm rescales to the bound") {
  ParameterStore store;
  Parameter& w = store.add("w", Shape{1, 2}, Init::kZeros);
  w.grad = Tensor::row({3, 4});
  CHECK(clip_grad_norm(store, 1.0) == doctest::Approx(5.0));
  CHECK(w.grad[0] == doctest::Approx(0.6));
  CHECK(w.grad[1] == doctest::Approx(0.8));
}

TEST_CASE("checkpoint round-trip and validation") {
  const auto dir = std::filesystem::temp_directory_path() / "s2da_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "model.ckpt";

  ParameterStore store(5);
  store.add("a.w", Shape{2, 3}, Init::kXavierUniform);
  store.add("b", Shape{1, 4}, Init::kUniform008);
  save_checkpoint(path, store, R"({"k":1})");

  Checkpoint ckpt = load_checkpoint(path);
  CHECK(ckpt.metadata == R"({"k":1})");
  ParameterStore other(99);
  other.add("a.w", Shape{2, 3}, Init::kZeros);
  other.add("b", Shape{1, 4}, Init::kZeros);
  restore_parameters(ckpt, other);
  CHECK(other.get("a.w").value == store.get("a.w").value);
  CHECK(other.get("b").value == store.get("b").value);

  ParameterStore wrong;
  wrong.add("a.w", Shape{3, 2}, Init::kZeros);
  wrong.add("b", Shape{1, 4}, Init::kZeros);
  CHECK_THROWS_AS(restore_parameters(ckpt, wrong), CheckpointError);

  {
    std::ofstream bad(dir / "bad.ckpt", std::ios::binary);
    bad << "NOTACKPT";
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), CheckpointError);

  // Truncate the payload.
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 8);
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
  std::filesystem::remove_all(dir);
}
