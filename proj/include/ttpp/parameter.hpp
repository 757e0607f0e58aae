#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ttpp/autograd.hpp"

namespace ttpp {

/// A named trainable leaf plus its SGD momentum buffer.
struct Parameter {
  std::string name;
  Var value;
  Tensor momentum;
  bool trainable = true;
};

/// Ordered bundle of uniquely named parameters. Modules keep `Var` handles
/// into the same nodes, so a set is move-only.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) = default;
  ParameterSet& operator=(ParameterSet&&) = default;

  Var add(std::string name, Tensor init);

  const Parameter& at(const std::string& name) const;
  Parameter& at(const std::string& name);
  bool contains(const std::string& name) const;

  std::vector<Parameter>& items() { return params_; }
  const std::vector<Parameter>& items() const { return params_; }
  std::size_t size() const { return params_.size(); }

  /// Total number of scalar weights.
  std::size_t count() const;
  void zero_grad();
  /// FNV-1a over names, shapes and value bits; cheap identity check for runs.
  std::uint64_t checksum() const;

 private:
  std::vector<Parameter> params_;
};

/// Uniform in ±sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// Momentum SGD: buffer ← momentum·buffer + grad; value ← value − lr·buffer.
/// Clears gradients afterwards.
void sgd_step(ParameterSet& params, double lr, double momentum);

}  // namespace ttpp
