#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>

#include "demo/core/tensor.hpp"
#include "demo/motion/factor_space.hpp"

namespace demo::motion {

enum class LipMode { kLinear, kNonlinear };

/// Knobs for synthetic driving signals and factor trajectories.
struct SignalSpec {
  std::size_t audio_channels = 8;
  LipMode lip_mode = LipMode::kLinear;
  double audio_amplitude = 1.0;
  double pose_persistence = 0.95;  ///< mean reversion of the pose walk
  double pose_momentum = 0.8;
  double pose_step = 0.08;
  double eye_jump_rate = 0.1;  ///< Poisson rate of saccade-like jumps per frame
  double residual_std = 0.05;

  bool operator==(const SignalSpec&) const = default;
};

struct WorldConfig {
  std::size_t latent_dim = 32;
  FactorDims dims;
  SignalSpec signal;
  std::size_t phi_dim = 24;
  std::size_t psi_dim = 16;
  std::uint64_t seed = 7;

  bool operator==(const WorldConfig&) const = default;
};

/// 3 Euler angles (radians) and 3 translations.
struct PoseParams {
  std::array<double, 3> euler{};
  std::array<double, 3> translation{};

  std::array<double, 6> flat() const;
  static PoseParams from_flat(std::span<const double> v);
};

/// Monotone bounded squash of a pose coefficient onto (-pi, pi).
double squash_angle(double coeff);
double unsquash_angle(double angle);

/// Maps 6 pose coefficients to pose parameters. Throws DimensionError for any
/// other width.
PoseParams pose_ground_truth(std::span<const double> pose_coeffs);

/// Frozen random linear feature maps standing in for the face-structure (phi)
/// and emotion (psi) feature networks.
class SurrogateExtractors {
 public:
  enum class Which { kPhi, kPsi };

  SurrogateExtractors() = default;
  SurrogateExtractors(std::size_t d, std::size_t phi_dim, std::size_t psi_dim, std::uint64_t seed);
  /// Explicit maps, d x p and d x q.
  SurrogateExtractors(Tensor phi, Tensor psi);

  /// Rows of `x` mapped through the chosen extractor.
  Tensor extract(const Tensor& x, Which which) const;
  const Tensor& map(Which which) const { return which == Which::kPhi ? phi_ : psi_; }
  std::size_t latent_dim() const { return phi_.rows(); }

 private:
  Tensor phi_;  // d x p
  Tensor psi_;  // d x q
};

struct MotionLatentSequence {
  Tensor latents;                  ///< F x d
  std::array<Tensor, 4> coeffs;    ///< per factor, F x k_f
  double frame_rate = 25.0;

  std::size_t frames() const { return latents.rows(); }
};

/// Layout: [audio | pose coefficients | eye coefficients].
struct ConditionSequence {
  Tensor channels;  ///< F x h
  std::size_t audio_channels = 0;
  std::size_t pose_channels = 0;
  std::size_t eye_channels = 0;

  std::size_t frames() const { return channels.rows(); }
  std::size_t width() const { return channels.cols(); }
  std::size_t pose_offset() const { return audio_channels; }
  std::size_t eye_offset() const { return audio_channels + pose_channels; }
  Tensor audio() const;
};

/// The fixed synthetic universe shared by every sequence: factor bases, the
/// audio-to-lip map and the surrogate extractors.
class MotionWorld {
 public:
  explicit MotionWorld(const WorldConfig& config);

  const WorldConfig& config() const { return config_; }
  const FactorSpaces& spaces() const { return spaces_; }
  const SurrogateExtractors& extractors() const { return extractors_; }
  const Tensor& lip_map() const { return lip_map_; }  ///< audio_channels x k_lip
  std::size_t latent_dim() const { return config_.latent_dim; }
  std::size_t condition_dim() const;

  /// Lip coefficients implied by audio rows.
  Tensor lip_from_audio(const Tensor& audio) const;

 private:
  WorldConfig config_;
  FactorSpaces spaces_;
  SurrogateExtractors extractors_;
  Tensor lip_map_;
};

/// Generates F frames of ground-truth-factored motion and their driving
/// conditions. Lip follows the audio channels deterministically, pose is a
/// smooth damped walk, eye is piecewise constant with Poisson-timed jumps and
/// the residual is small white noise.
std::pair<MotionLatentSequence, ConditionSequence> synthesize_sequence(std::size_t frames, const MotionWorld& world,
                                                                       std::uint64_t seed);

/// Latent-level anchor frame: eye component of v1 plus every other component
/// of v2. Works row-wise on matching matrices.
Tensor composite_anchor(const Tensor& v1, const Tensor& v2, const FactorSpaces& spaces);

/// Replaces one factor's coefficients in every row of `latents`.
Tensor edit_factor(const Tensor& latents, Factor f, const Tensor& new_coeffs, const FactorSpaces& spaces);

}  // namespace demo::motion
