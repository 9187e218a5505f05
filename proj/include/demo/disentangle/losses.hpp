#pragma once

#include <span>
#include <vector>

#include "demo/core/tape.hpp"
#include "demo/core/tensor.hpp"
#include "demo/motion/world.hpp"

namespace demo::disentangle {

// Plain-value forms operate on single feature vectors. Similarities are raw
// cosines divided by `temperature`; 1.0 keeps the unscaled form.

/// ||phi(I0) - phi(Ig)||^2 + ||psi(I0) - psi(Ig)||^2, summed over rows.
double motion_recon_loss(const Tensor& generated, const Tensor& truth, const motion::SurrogateExtractors& ex);

/// -log softmax over {S(f1, fa), S(f2, fa)}, picking the first. Throws
/// ZeroVectorError on a zero-norm input and Error if the result leaves the
/// range allowed by cosine bounds.
double eye_contrastive_loss(std::span<const double> f1, std::span<const double> f2, std::span<const double> fa,
                            double temperature = 1.0);

/// Sum of absolute differences over the 6 pose parameters.
double pose_loss(const motion::PoseParams& pred, const motion::PoseParams& truth);

/// -log softmax picking the positive among {positive, negatives...}.
/// Throws Error when `negatives` is empty.
double infonce(std::span<const double> query, std::span<const double> positive,
               const std::vector<std::span<const double>>& negatives, double temperature = 1.0);

/// Range of eye_contrastive_loss for the given temperature.
std::pair<double, double> eye_contrastive_bounds(double temperature = 1.0);

// Differentiable batch forms. Each returns a scalar Var averaged over rows.

/// Mean over rows of the per-row motion reconstruction loss.
Var motion_recon_loss(Var generated, const Tensor& truth, const motion::SurrogateExtractors& ex);

/// Row i: eye contrastive loss of (f1[i], f2[i], fa[i]).
Var eye_contrastive_loss(Var f1, Var f2, Var fa, double temperature = 1.0);

/// Mean over rows of the 6-parameter L1 distance.
Var pose_loss(Var pred, const Tensor& truth);

/// In-batch InfoNCE: row i of `keys` is the positive for row i of `queries`
/// and every other row is a negative (K = rows - 1). Swapping the arguments
/// gives the opposite direction.
Var infonce(Var queries, Var keys, double temperature = 1.0);

}  // namespace demo::disentangle
