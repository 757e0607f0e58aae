#pragma once

#include <functional>
#include <vector>

#include "ttpp/autograd.hpp"

namespace ttpp {

struct GradCheckOptions {
  double step = 1e-5;
  double floor = 1e-8;
};

/// Compares reverse-mode gradients of a scalar function with central
/// differences. Returns max over elements of |a−n| / max(|a|, |n|, floor).
///
/// `f` is re-evaluated with each leaf perturbed in place, so it must rebuild
/// its graph from the leaves on every call.
double grad_check(const std::function<Var()>& f, const std::vector<Var>& leaves, GradCheckOptions opts = {});

/// Convenience form: wraps `inputs` as fresh leaves and passes them to `f`.
double grad_check(const std::function<Var(const std::vector<Var>&)>& f, const std::vector<Tensor>& inputs,
                  GradCheckOptions opts = {});

}  // namespace ttpp
