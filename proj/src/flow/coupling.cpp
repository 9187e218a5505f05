#include "demo/flow/coupling.hpp"

#include <limits>
#include <numeric>

#include "demo/core/error.hpp"

namespace demo::flow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Shortest-augmenting-path Hungarian method with potentials, O(n^3).
// `allowed[i*n+j] == 0` removes an edge. Returns the assignment row -> col
// and its cost, or cost = inf when no perfect matching exists.
std::pair<std::vector<std::size_t>, double> hungarian(const std::vector<double>& cost,
                                                      const std::vector<unsigned char>& allowed, std::size_t n) {
  // 1-based internals; column 0 is the virtual root.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  auto c = [&](std::size_t i, std::size_t j) {
    return allowed[(i - 1) * n + (j - 1)] ? cost[(i - 1) * n + (j - 1)] : kInf;
  };
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = c(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      if (j1 == 0 || delta == kInf) return {{}, kInf};
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
  return {row_to_col, assignment_cost(cost, row_to_col)};
}

double tie_tolerance(double best) { return 1e-12 * (1.0 + std::abs(best)); }

// Lexicographically smallest optimal permutation: fix rows in order, trying
// columns in increasing index, and keep the first that still admits an
// optimal completion.
std::vector<std::size_t> exact_assignment(const std::vector<double>& cost, std::size_t n) {
  std::vector<unsigned char> allowed(n * n, 1);
  const auto [first, best] = hungarian(cost, allowed, n);
  const double tol = tie_tolerance(best);
  std::vector<std::size_t> perm(n);
  std::vector<char> taken(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    bool fixed = false;
    for (std::size_t j = 0; j < n && !fixed; ++j) {
      if (taken[j]) continue;
      std::vector<unsigned char> trial = allowed;
      for (std::size_t k = 0; k < n; ++k) {
        trial[i * n + k] = k == j;
        trial[k * n + j] = k == i;
      }
      const auto [_, c] = hungarian(cost, trial, n);
      if (c <= best + tol) {
        perm[i] = j;
        taken[j] = 1;
        allowed = std::move(trial);
        fixed = true;
      }
    }
    if (!fixed) throw Error("ot_couple: tie refinement lost the optimum");  // unreachable for finite costs
  }
  return perm;
}

std::vector<std::size_t> greedy_assignment(const std::vector<double>& cost, std::size_t n) {
  std::vector<std::size_t> perm(n);
  std::vector<char> taken(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best_j = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (!taken[j] && (best_j == n || cost[i * n + j] < cost[i * n + best_j])) best_j = j;
    }
    perm[i] = best_j;
    taken[best_j] = 1;
  }
  std::vector<std::size_t> identity(n);
  std::iota(identity.begin(), identity.end(), std::size_t{0});
  if (assignment_cost(cost, identity) < assignment_cost(cost, perm)) perm = identity;

  // Pairwise swaps until no single swap lowers the cost.
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) {
        const double now = cost[a * n + perm[a]] + cost[b * n + perm[b]];
        const double swapped = cost[a * n + perm[b]] + cost[b * n + perm[a]];
        if (swapped < now) {
          std::swap(perm[a], perm[b]);
          improved = true;
        }
      }
    }
  }
  return perm;
}

}  // namespace

std::vector<double> pairwise_sq_cost(const Tensor& x0, const Tensor& x1) {
  if (x0.shape() != x1.shape() || x0.ndim() != 2) {
    throw DimensionError("ot_couple: batches must be equal-shaped matrices, got " + shape_str(x0.shape()) + " and " +
                         shape_str(x1.shape()));
  }
  const std::size_t n = x0.rows(), D = x0.cols();
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < D; ++k) {
        const double diff = x0(i, k) - x1(j, k);
        s += diff * diff;
      }
      cost[i * n + j] = s;
    }
  }
  return cost;
}

double assignment_cost(const std::vector<double>& cost, const std::vector<std::size_t>& perm) {
  const std::size_t n = perm.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += cost[i * n + perm[i]];
  return s;
}

OTCoupling ot_couple(const Tensor& x0, const Tensor& x1, CouplingMethod method) {
  const auto cost = pairwise_sq_cost(x0, x1);
  const std::size_t n = x0.rows();
  OTCoupling out;
  switch (method) {
    case CouplingMethod::kNone:
      out.permutation.resize(n);
      std::iota(out.permutation.begin(), out.permutation.end(), std::size_t{0});
      break;
    case CouplingMethod::kExact:
      if (n > kExactCouplingLimit) {
        throw CapacityError("exact coupling supports at most " + std::to_string(kExactCouplingLimit) +
                            " rows, got " + std::to_string(n));
      }
      out.permutation = exact_assignment(cost, n);
      break;
    case CouplingMethod::kGreedy:
      out.permutation = greedy_assignment(cost, n);
      break;
  }
  out.total_cost = assignment_cost(cost, out.permutation);
  return out;
}

}  // namespace demo::flow
