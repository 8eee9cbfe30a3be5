#include "s2da/autodiff/parameter.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace s2da::ad {
namespace {

// FNV-1a, stable across platforms.
std::uint64_t hash_name(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

Parameter& ParameterStore::add(const std::string& name, Shape shape, Init init) {
  if (params_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = Tensor(shape);
  p->grad = Tensor(shape);

  std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                    static_cast<std::uint32_t>(hash_name(name)),
                    static_cast<std::uint32_t>(hash_name(name) >> 32)};
  std::mt19937_64 rng(seq);
  double limit = 0.0;
  switch (init) {
    case Init::kZeros:
      break;
    case Init::kUniform008:
      limit = 0.08;
      break;
    case Init::kXavierUniform: {
      const double fan_in = static_cast<double>(shape[0]);
      const double fan_out = static_cast<double>(shape.rank() > 1 ? shape[1] : 1);
      limit = std::sqrt(6.0 / (fan_in + fan_out));
      break;
    }
  }
  if (limit > 0.0) {
    for (double& v : p->value.data()) v = (2.0 * unit_uniform(rng) - 1.0) * limit;
  }
  auto& ref = *p;
  params_.emplace(name, std::move(p));
  return ref;
}

Parameter& ParameterStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
  return *it->second;
}

const Parameter& ParameterStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
  return *it->second;
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& [_, p] : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& [_, p] : params_) out.push_back(p.get());
  return out;
}

void ParameterStore::zero_grad() {
  for (auto& [_, p] : params_) p->grad.fill(0.0);
}

void ParameterStore::set_frozen(const std::string& prefix, bool frozen) {
  for (auto& [name, p] : params_) {
    if (name.compare(0, prefix.size(), prefix) == 0) p->frozen = frozen;
  }
}

std::size_t ParameterStore::total_size() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += p->value.size();
  return n;
}

double clip_grad_norm(ParameterStore& store, double max_norm) {
  double sq = 0.0;
  for (Parameter* p : store.all()) {
    if (p->frozen) continue;
    for (double g : p->grad.data()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (Parameter* p : store.all()) {
      if (p->frozen) continue;
      for (double& g : p->grad.data()) g *= scale;
    }
  }
  return norm;
}

}  // namespace s2da::ad
