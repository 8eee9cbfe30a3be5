#include "s2da/autodiff/optimizer.hpp"

#include <cmath>

namespace s2da::ad {
namespace {

void check_gradient(const Parameter& p) {
  if (!(p.grad.shape() == p.value.shape())) {
    throw ShapeError("optimizer: gradient shape " + p.grad.shape().str() + " for parameter " +
                     p.name + " of shape " + p.value.shape().str());
  }
  if (!p.grad.all_finite()) throw NumericError("optimizer: non-finite gradient in " + p.name);
}

}  // namespace

void Sgd::step(ParameterStore& store) {
  auto params = store.all();
  step(params);
}

void Sgd::step(std::span<Parameter* const> params) {
  for (Parameter* p : params) {
    if (p->frozen) continue;
    check_gradient(*p);
    auto w = p->value.data();
    auto g = p->grad.data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= learning_rate_ * g[i];
  }
}

void Adam::step(ParameterStore& store) {
  auto params = store.all();
  step(params);
}

void Adam::step(std::span<Parameter* const> params) {
  for (Parameter* p : params) {
    if (!p->frozen) check_gradient(*p);
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  for (Parameter* p : params) {
    if (p->frozen) continue;
    Moments& mom = moments_[p];
    if (mom.m.empty()) {
      mom.m.assign(p->value.size(), 0.0);
      mom.v.assign(p->value.size(), 0.0);
    }
    auto w = p->value.data();
    auto g = p->grad.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      mom.m[i] = options_.beta1 * mom.m[i] + (1.0 - options_.beta1) * g[i];
      mom.v[i] = options_.beta2 * mom.v[i] + (1.0 - options_.beta2) * g[i] * g[i];
      const double m_hat = mom.m[i] / bc1;
      const double v_hat = mom.v[i] / bc2;
      w[i] -= options_.learning_rate * m_hat / (std::sqrt(v_hat) + options_.epsilon);
    }
  }
}

}  // namespace s2da::ad
