#include "ttpp/parameter.hpp"

#include <bit>
#include <cmath>

#include "ttpp/errors.hpp"

namespace ttpp {

Var ParameterSet::add(std::string name, Tensor init) {
  if (contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
  Tensor momentum(init.shape());
  Var v = Var::leaf(std::move(init), true);
  params_.push_back(Parameter{std::move(name), v, std::move(momentum), true});
  return v;
}

const Parameter& ParameterSet::at(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return p;
  throw ContractError("no parameter named '" + name + "'");
}

Parameter& ParameterSet::at(const std::string& name) {
  return const_cast<Parameter&>(static_cast<const ParameterSet&>(*this).at(name));
}

bool ParameterSet::contains(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return true;
  return false;
}

std::size_t ParameterSet::count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.value().size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.value.zero_grad();
}

std::uint64_t ParameterSet::checksum() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xFFu;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& p : params_) {
    for (char c : p.name) mix(static_cast<unsigned char>(c));
    for (auto e : p.value.shape()) mix(e);
    for (double v : p.value.value().values()) mix(std::bit_cast<std::uint64_t>(v));
  }
  return h;
}

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t({fan_in, fan_out});
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

void sgd_step(ParameterSet& params, double lr, double momentum) {
  for (auto& p : params.items()) {
    if (!p.trainable) continue;
    if (!p.value.has_grad()) throw ContractError("sgd_step: parameter '" + p.name + "' has no gradient");
    const Tensor& g = p.value.grad();
    Tensor& w = p.value.mutable_value();
    for (std::size_t i = 0; i < w.size(); ++i) {
      p.momentum[i] = momentum * p.momentum[i] + g[i];
      w[i] -= lr * p.momentum[i];
    }
    p.value.clear_grad();
  }
}

}  // namespace ttpp
