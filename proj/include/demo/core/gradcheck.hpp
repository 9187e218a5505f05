#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "demo/core/tape.hpp"

namespace demo {

/// Per-coordinate comparison of autodiff against central differences.
///
/// Relative error is |autodiff - numeric| / max(|autodiff|, |numeric|, floor);
/// the floor keeps near-zero gradients from amplifying round-off.
struct GradCheckReport {
  std::vector<double> analytic;
  std::vector<double> numeric;
  std::vector<double> rel_error;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double tol = 0.0;
  bool passed = false;
};

using ScalarFn = std::function<Var(Tape&, Var)>;

GradCheckReport grad_check(const ScalarFn& f, const Tensor& x, double h = 1e-6, double tol = 1e-4,
                           double floor = 1e-3);

/// Checks the gradient of `loss` with respect to every element of every
/// parameter. `loss` must build its graph on the tape it is given.
GradCheckReport grad_check_params(const std::function<Var(Tape&)>& loss, const std::vector<Parameter*>& params,
                                  double h = 1e-6, double tol = 1e-4, double floor = 1e-3);

}  // namespace demo
