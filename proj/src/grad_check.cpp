#include "ttpp/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "ttpp/errors.hpp"

namespace ttpp {

namespace {

double evaluate(const std::function<Var()>& f) {
  Var out = f();
  if (out.value().size() != 1) {
    throw ContractError("grad_check: function output must be scalar, got " + shape_string(out.shape()));
  }
  return out.value()[0];
}

}  // namespace

double grad_check(const std::function<Var()>& f, const std::vector<Var>& leaves, GradCheckOptions opts) {
  for (Var leaf : leaves) leaf.clear_grad();
  Var out = f();
  if (out.value().size() != 1) {
    throw ContractError("grad_check: function output must be scalar, got " + shape_string(out.shape()));
  }
  out.backward();

  double worst = 0.0;
  for (const auto& leaf_const : leaves) {
    Var leaf = leaf_const;
    const Tensor analytic = leaf.has_grad() ? leaf.grad() : Tensor(leaf.shape());
    Tensor& x = leaf.mutable_value();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double saved = x[i];
      x[i] = saved + opts.step;
      const double up = evaluate(f);
      x[i] = saved - opts.step;
      const double down = evaluate(f);
      x[i] = saved;
      const double numeric = (up - down) / (2.0 * opts.step);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), opts.floor});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
    leaf.clear_grad();
  }
  return worst;
}

double grad_check(const std::function<Var(const std::vector<Var>&)>& f, const std::vector<Tensor>& inputs,
                  GradCheckOptions opts) {
  std::vector<Var> leaves;
  leaves.reserve(inputs.size());
  for (const auto& t : inputs) leaves.push_back(Var::leaf(t, true));
  return grad_check([&] { return f(leaves); }, leaves, opts);
}

}  // namespace ttpp
