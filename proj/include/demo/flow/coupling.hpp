#pragma once

#include <cstddef>
#include <vector>

#include "demo/core/tensor.hpp"

namespace demo::flow {

enum class CouplingMethod { kNone, kExact, kGreedy };

/// Noise row i is paired with data row permutation[i].
struct OTCoupling {
  std::vector<std::size_t> permutation;
  double total_cost = 0.0;  ///< sum_i ||x0_i - x1_perm(i)||^2
};

inline constexpr std::size_t kExactCouplingLimit = 64;

/// Squared-Euclidean cost matrix between rows, n x n row-major.
std::vector<double> pairwise_sq_cost(const Tensor& x0, const Tensor& x1);

/// Minibatch coupling between rows of x0 and x1 (each row one flattened
/// sequence). kExact returns the optimal assignment and, among optimal ones,
/// the lexicographically smallest permutation. kGreedy is nearest-available
/// in row order followed by pairwise-swap improvement; never worse than the
/// identity. kNone is the identity.
/// Throws DimensionError on mismatched shapes and CapacityError for exact
/// coupling beyond kExactCouplingLimit rows.
OTCoupling ot_couple(const Tensor& x0, const Tensor& x1, CouplingMethod method);

/// Cost of a given permutation under `cost` (n x n), summed in row order.
double assignment_cost(const std::vector<double>& cost, const std::vector<std::size_t>& perm);

}  // namespace demo::flow
