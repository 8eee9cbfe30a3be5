#pragma once

#include <unordered_map>
#include <vector>

#include "s2da/autodiff/parameter.hpp"

namespace s2da::ad {

/// Plain gradient descent: w <- w - lr * g.
class Sgd {
 public:
  explicit Sgd(double learning_rate) : learning_rate_(learning_rate) {}
  void step(ParameterStore& store);
  void step(std::span<Parameter* const> params);

 private:
  double learning_rate_;
};

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias-corrected first and second moments.
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}
  void step(ParameterStore& store);
  void step(std::span<Parameter* const> params);
  long long steps() const { return t_; }
  const AdamOptions& options() const { return options_; }

 private:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };
  AdamOptions options_;
  long long t_ = 0;
  std::unordered_map<const Parameter*, Moments> moments_;
};

}  // namespace s2da::ad
