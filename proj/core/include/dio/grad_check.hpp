#pragma once

#include <functional>

#include "dio/graph.hpp"

namespace dio {

/// Scalar-valued function of one tensor, expressed on a graph.
using ScalarFn = std::function<Var(Graph&, Var)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  Tensor autodiff_grad;
  Tensor numeric_grad;
};

/// Compares reverse-mode gradients of `fn` at `point` with central
/// differences. Relative error per coordinate is
/// |autodiff - fd| / max(1, |fd|). Throws GradError naming the coordinate if
/// any evaluation is non-finite.
GradCheckResult grad_check(const ScalarFn& fn, const Tensor& point, double fd_step = 1e-5);

/// Gradient check over an arbitrary parameter set: `loss` builds the scalar
/// on a fresh graph each call, reading the current values of `params`.
/// Marks every parameter as requiring a gradient.
double grad_check_params(const std::function<Var(Graph&)>& loss, std::vector<Tensor> params,
                         double fd_step = 1e-5);

}  // namespace dio
