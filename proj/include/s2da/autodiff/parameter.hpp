#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "s2da/autodiff/tensor.hpp"

namespace s2da::ad {

/// A named trainable tensor with its gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  /// Frozen parameters enter graphs as constants and are skipped by optimizers.
  bool frozen = false;
};

enum class Init {
  kZeros,
  kUniform008,     // uniform(-0.08, 0.08), recurrent weights
  kXavierUniform,  // uniform(-sqrt(6/(fan_in+fan_out)), +...), dense layers
};

/// Owns every parameter of a model. Names are unique; addresses are stable.
///
/// Initial values depend only on (seed, name), so two stores built from the
/// same seed agree on every shared parameter name regardless of the order in
/// which parameters are created.
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed = 0) : seed_(seed) {}
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  Parameter& add(const std::string& name, Shape shape, Init init);

  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) > 0; }

  /// Parameters in name order.
  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;

  void zero_grad();
  void set_frozen(const std::string& prefix, bool frozen);
  std::size_t total_size() const;
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::map<std::string, std::unique_ptr<Parameter>> params_;
};

/// Global L2 norm clipping across all non-frozen gradients. Returns the norm before clipping.
double clip_grad_norm(ParameterStore& store, double max_norm);

}  // namespace s2da::ad
