#pragma once

#include <cstdint>
#include <string>

#include "demo/core/nn.hpp"

namespace demo::disentangle {

struct EncoderConfig {
  std::size_t latent_dim = 32;  ///< d, motion latent width
  std::size_t audio_dim = 8;    ///< audio channels fed to E_aud
  std::size_t motion_dim = 32;  ///< m, unified motion feature width
  std::size_t hidden = 64;
  std::size_t eye_dim = 8;
  std::size_t lip_dim = 8;
  bool variational = false;  ///< Gaussian E_mot with a learned log-std (VAE ablation)

  bool operator==(const EncoderConfig&) const = default;
};

/// E_mot: latent -> m; heads E_eye, E_pose, E_lip on the motion feature;
/// E_aud on audio frames; G: m -> latent decodes the motion feature back into
/// the latent space so the reconstruction loss has something to compare.
/// Every network is a 2-hidden-layer tanh MLP.
class EncoderStack {
 public:
  EncoderStack(const EncoderConfig& config, std::uint64_t seed);

  EncoderStack(EncoderStack&&) = default;
  EncoderStack& operator=(EncoderStack&&) = default;

  const EncoderConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  Var motion(Tape& t, Var latents) const;  ///< E_mot (the mean, when variational)
  Var eye(Tape& t, Var motion) const;
  Var pose(Tape& t, Var motion) const;
  Var lip(Tape& t, Var motion) const;
  Var audio(Tape& t, Var audio_frames) const;
  Var decode(Tape& t, Var motion) const;
  Var log_std(Tape& t) const;  ///< 1 x m; only when variational

  // Frozen evaluation helpers on plain tensors (rows are frames).
  Tensor encode(const Tensor& latents) const;
  Tensor decode(const Tensor& motion) const;
  Tensor eye_features(const Tensor& latents) const;
  Tensor lip_features(const Tensor& latents) const;
  Tensor pose_params(const Tensor& latents) const;
  Tensor audio_features(const Tensor& audio_frames) const;

  std::string manifest_json() const;
  void save(const std::string& path) const;
  static EncoderStack load(const std::string& path);

 private:
  EncoderConfig config_;
  ParameterSet params_;
  Mlp mot_, eye_, pose_, lip_, aud_, dec_;
  Parameter* log_std_ = nullptr;
};

}  // namespace demo::disentangle
