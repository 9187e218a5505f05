#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "demo/field/field_net.hpp"
#include "demo/flow/flow.hpp"

namespace demo::sampler {

/// Field evaluated at (x, t).
using Field = std::function<Tensor(const Tensor& x, double t)>;

struct Trajectory {
  std::vector<Tensor> states;  ///< N + 1 snapshots, states[k] at t = k / N
  std::vector<double> times;

  const Tensor& final_state() const { return states.back(); }
};

/// x_{k+1} = x_k + (1/N) field(x_k, k/N). Throws ConfigError for N == 0 and
/// DivergenceError naming the step when a state becomes non-finite.
Trajectory euler_integrate(const Field& field, const Tensor& x0, std::size_t steps);

enum class SamplerKind { kEuler, kDdpm };

struct SolverConfig {
  std::size_t steps = 20;   ///< Euler steps per segment
  std::size_t window = 16;  ///< frames per segment including the preceding context
  std::size_t context = 4;  ///< preceding frames carried between segments
  SamplerKind kind = SamplerKind::kEuler;

  std::size_t new_frames() const { return window - context; }
  void validate() const;
};

/// Sliding-window generation for several sequences at once. Each sequence has
/// its own conditions (M x cond_dim, or M x 0 for unconditional nets) and
/// seed; segment s of sequence i draws its noise from SeededRng(seeds[i]).fork(s),
/// so results do not depend on batch composition. The first segment sees zero
/// context; later ones see the last `context` generated frames.
/// Returns one M x d tensor per sequence.
std::vector<Tensor> generate(const field::FieldNet& net, const std::vector<Tensor>& conditions, std::size_t frames,
                             const SolverConfig& config, const std::vector<std::uint64_t>& seeds);

/// Single-sequence convenience wrapper.
Tensor generate(const field::FieldNet& net, const Tensor& conditions, std::size_t frames, const SolverConfig& config,
                std::uint64_t seed);

struct ConvergenceRow {
  std::size_t steps = 0;
  double error = 0.0;  ///< max-abs endpoint error
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  double order = 0.0;  ///< minus the least-squares slope of log(error) on log(N)
};

/// Endpoint error of Euler on dx/dt = A x from x0 over t in [0, 1], against
/// exp(A) x0.
ConvergenceTable convergence_probe(const Eigen::MatrixXd& a, const Tensor& x0, const std::vector<std::size_t>& steps);

}  // namespace demo::sampler
