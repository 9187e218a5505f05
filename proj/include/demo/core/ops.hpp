#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "demo/core/tape.hpp"

// Differentiable operations on Tape values. Matrices are row-major; ops that
// talk about rows treat every extent but the last as the row index.

namespace demo::ops {

Var matmul(Var a, Var b);     ///< a[m x k] * b[k x n]
Var matmul_nt(Var a, Var b);  ///< a[m x k] * b[n x k]^T

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  ///< elementwise
Var scale(Var a, double s);
Var add_row(Var a, Var row);  ///< broadcast a 1 x n row over every row of a
Var mul_row(Var a, Var row);
Var repeat_rows(Var a, std::size_t times);  ///< row r -> rows r*times .. r*times+times-1

Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(Var a, std::size_t start, std::size_t count);

Var tanh(Var a);
Var gelu(Var a);  ///< tanh approximation
Var exp(Var a);

/// Per-row normalization to zero mean and unit population variance.
Var layer_norm(Var a, double eps = 1e-5);

/// Row softmax. `allow`, when non-empty, has one entry per element.
Var softmax(Var a, std::span<const unsigned char> allow = {});

/// Masked multi-head scaled dot-product attention over `batch` blocks of
/// `frames` rows. `allow` is frames x frames.
Var attention(Var q, Var k, Var v, std::span<const unsigned char> allow, std::size_t batch, std::size_t frames,
              std::size_t heads);

Var normalize_rows(Var a);
Var row_dot(Var a, Var b);  ///< n x 1
/// Mean over rows of -log softmax(logits)[target].
Var cross_entropy_rows(Var logits, std::span<const std::size_t> targets);

/// Forward difference along frames within each of `batch` blocks.
Var frame_diff(Var a, std::size_t batch, std::size_t frames);

Var sum(Var a);
Var mean(Var a);
Var l1_loss(Var pred, Var target);   ///< mean |pred - target|, subgradient 0 at 0
Var mse_loss(Var pred, Var target);  ///< mean (pred - target)^2

}  // namespace demo::ops
