#pragma once

#include <array>
#include <cstdint>
#include <ostream>
#include <vector>

#include "demo/disentangle/encoder_stack.hpp"
#include "demo/motion/world.hpp"

namespace demo::disentangle {

/// Frames drawn from many synthetic sequences, flattened so any row can be
/// sampled independently.
struct FramePool {
  Tensor latents;                ///< N x d
  std::array<Tensor, 4> coeffs;  ///< per factor, N x k_f
  Tensor audio;                  ///< N x A
  Tensor pose;                   ///< N x 6 ground-truth pose parameters

  std::size_t size() const { return latents.rows(); }
};

FramePool build_frame_pool(const motion::MotionWorld& world, std::size_t sequences, std::size_t frames,
                           std::uint64_t seed);

/// kFcme trains the five-loss objective; kVae replaces it with a Gaussian
/// encoder, reconstruction through the same extractors and a KL term.
enum class Objective { kFcme, kVae };

struct TrainerConfig {
  EncoderConfig encoder;
  Objective objective = Objective::kFcme;
  std::size_t steps = 2000;
  std::size_t batch = 32;
  double lr = 1e-3;
  double temperature = 1.0;
  double vae_beta = 1e-3;
  std::size_t pool_sequences = 256;
  std::size_t pool_frames = 16;
  std::uint64_t seed = 1;
};

struct LossRecord {
  std::size_t step = 0;
  double mot = 0, eye = 0, pose = 0, a2v = 0, v2a = 0, kl = 0, total = 0;
};

struct TrainResult {
  EncoderStack stack;
  std::vector<LossRecord> history;
};

/// Joint stage-1 training. Deterministic per (config, world). Throws
/// DivergenceError naming the step and the offending loss when any term is
/// not finite.
TrainResult train_disentangler(const TrainerConfig& config, const motion::MotionWorld& world);

/// Columns: step,l_mot,l_eye,l_pose,l_a2v,l_v2a,l_kl,total
void write_loss_csv(std::ostream& os, const std::vector<LossRecord>& history);

/// Held-out linear-probe R^2 of head features against each factor's
/// ground-truth coefficients. Probes are fitted on the first half of the pool
/// and scored on the second half.
struct ProbeReport {
  std::array<double, 4> eye{};   ///< E_eye features vs factor k
  std::array<double, 4> lip{};   ///< E_lip features vs factor k
  std::array<double, 4> pose{};  ///< E_pose output vs factor k

  /// same-factor R^2 minus the largest cross-factor R^2 (residual excluded).
  double eye_gap() const;
  double lip_gap() const;
};

ProbeReport probe_heads(const EncoderStack& stack, const FramePool& heldout);

}  // namespace demo::disentangle
