#pragma once

#include <random>
#include <string>

#include "ttpp/autograd.hpp"
#include "ttpp/parameter.hpp"
#include "ttpp/tensor.hpp"

namespace ttpp::test {

inline Tensor random_tensor(std::size_t rows, std::size_t cols, Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> normal(0.0, sd);
  Tensor t({rows, cols});
  for (auto& v : t.values()) v = normal(rng);
  return t;
}

inline Var random_leaf(std::size_t rows, std::size_t cols, Rng& rng, double sd = 1.0) {
  return Var::leaf(random_tensor(rows, cols, rng, sd));
}

inline double row_sum(const Tensor& t, std::size_t r) {
  double s = 0.0;
  for (double v : t.row_span(r)) s += v;
  return s;
}

// Biases start at zero and LayerNorm gains at one; adding noise to them moves
// a freshly initialised model off that special point so dead ReLU units cannot
// leave a LayerNorm input exactly constant during a gradient check.
inline void jitter_offsets(ParameterSet& params, Rng& rng, double sd = 0.5) {
  std::normal_distribution<double> normal(0.0, sd);
  for (auto& p : params.items()) {
    if (p.name.find("bias") == std::string::npos && p.name.find("gain") == std::string::npos) continue;
    for (auto& v : p.value.mutable_value().values()) v += normal(rng);
  }
}

}  // namespace ttpp::test
