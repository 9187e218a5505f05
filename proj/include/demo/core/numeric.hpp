#pragma once

#include <span>

#include "demo/core/tensor.hpp"

// Tape-free evaluations of the core ops.

namespace demo {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor softmax(const Tensor& x, std::span<const unsigned char> allow = {});
Tensor layer_norm(const Tensor& x, double eps = 1e-5);

/// Throws ZeroVectorError when either input has zero norm.
double cosine_similarity(std::span<const double> a, std::span<const double> b);
double l1_loss(const Tensor& pred, const Tensor& target);
double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

}  // namespace demo
