#pragma once

#include <Eigen/Dense>

#include "demo/core/tensor.hpp"

namespace demo {

Eigen::MatrixXd to_eigen(const Tensor& t);
Tensor from_eigen(const Eigen::MatrixXd& m);

/// Affine least-squares map Y ~ X * coef + intercept, fitted in closed form.
struct LinearProbe {
  Tensor coef;       // in x out
  Tensor intercept;  // 1 x out

  static LinearProbe fit(const Tensor& x, const Tensor& y, double ridge = 0.0);
  Tensor predict(const Tensor& x) const;
  bool fitted() const { return !coef.empty(); }
};

/// Pooled coefficient of determination: 1 - SS_res / SS_tot summed over all
/// output columns (each column centered on its own mean).
double r_squared(const Tensor& predicted, const Tensor& actual);

/// R^2 of the closed-form affine probe fitted and scored on the same data.
double probe_r_squared(const Tensor& features, const Tensor& targets, double ridge = 1e-9);

}  // namespace demo
