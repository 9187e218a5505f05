#include "demo/motion/world.hpp"

#include <cmath>
#include <numbers>

#include "demo/core/error.hpp"
#include "demo/core/numeric.hpp"
#include "demo/core/rng.hpp"

namespace demo::motion {

namespace {
constexpr std::uint64_t kStreamSpaces = 1;
constexpr std::uint64_t kStreamLipMap = 2;
constexpr std::uint64_t kStreamExtractors = 3;
}  // namespace

std::array<double, 6> PoseParams::flat() const {
  return {euler[0], euler[1], euler[2], translation[0], translation[1], translation[2]};
}

PoseParams PoseParams::from_flat(std::span<const double> v) {
  if (v.size() != 6) throw DimensionError("PoseParams needs 6 values");
  PoseParams p;
  for (int i = 0; i < 3; ++i) {
    p.euler[i] = v[i];
    p.translation[i] = v[i + 3];
  }
  return p;
}

double squash_angle(double coeff) { return 2.0 * std::atan(coeff); }
double unsquash_angle(double angle) { return std::tan(0.5 * angle); }

PoseParams pose_ground_truth(std::span<const double> pose_coeffs) {
  if (pose_coeffs.size() != 6) {
    throw DimensionError("pose ground truth needs 6 pose coefficients, got " + std::to_string(pose_coeffs.size()));
  }
  PoseParams p;
  for (int i = 0; i < 3; ++i) {
    p.euler[i] = squash_angle(pose_coeffs[i]);
    p.translation[i] = pose_coeffs[i + 3];
  }
  return p;
}

SurrogateExtractors::SurrogateExtractors(std::size_t d, std::size_t phi_dim, std::size_t psi_dim,
                                         std::uint64_t seed) {
  SeededRng rng(seed);
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  phi_ = rng.normal_tensor({d, phi_dim}, sd);
  psi_ = rng.normal_tensor({d, psi_dim}, sd);
}

SurrogateExtractors::SurrogateExtractors(Tensor phi, Tensor psi) : phi_(std::move(phi)), psi_(std::move(psi)) {
  if (phi_.ndim() != 2 || psi_.ndim() != 2 || phi_.rows() != psi_.rows()) {
    throw DimensionError("surrogate maps must be matrices with equal row counts");
  }
}

Tensor SurrogateExtractors::extract(const Tensor& x, Which which) const {
  const Tensor& m = map(which);
  if (m.empty()) throw Error("surrogate extractor not initialized");
  if (x.cols() != m.rows()) throw DimensionError("extract: latent width mismatch");
  return matmul(x.ndim() == 1 ? x.reshaped({1, x.size()}) : x, m);
}

Tensor ConditionSequence::audio() const {
  Tensor a({frames(), audio_channels});
  for (std::size_t f = 0; f < frames(); ++f)
    for (std::size_t c = 0; c < audio_channels; ++c) a(f, c) = channels(f, c);
  return a;
}

MotionWorld::MotionWorld(const WorldConfig& config) : config_(config) {
  if (config.dims.pose != 6) throw DimensionError("pose factor must have 6 dimensions (3 angles + 3 translations)");
  if (config.signal.audio_channels == 0) throw ConfigError("audio_channels must be positive");
  SeededRng root(config.seed);
  spaces_ = build_factor_spaces(config.latent_dim, config.dims, root.fork(kStreamSpaces).next_u64());
  SeededRng lip_rng = root.fork(kStreamLipMap);
  lip_map_ = lip_rng.normal_tensor({config.signal.audio_channels, config.dims.lip},
                                   1.0 / std::sqrt(static_cast<double>(config.signal.audio_channels)));
  extractors_ = SurrogateExtractors(config.latent_dim, config.phi_dim, config.psi_dim,
                                    root.fork(kStreamExtractors).next_u64());
}

std::size_t MotionWorld::condition_dim() const {
  return config_.signal.audio_channels + config_.dims.pose + config_.dims.eye;
}

Tensor MotionWorld::lip_from_audio(const Tensor& audio) const {
  Tensor lip = matmul(audio, lip_map_);
  if (config_.signal.lip_mode == LipMode::kNonlinear)
    for (auto& v : lip.data()) v = std::tanh(v);
  return lip;
}

std::pair<MotionLatentSequence, ConditionSequence> synthesize_sequence(std::size_t frames, const MotionWorld& world,
                                                                       std::uint64_t seed) {
  if (frames == 0) throw DimensionError("synthesize_sequence: need at least one frame");
  const auto& cfg = world.config();
  const auto& sig = cfg.signal;
  const auto& dims = cfg.dims;
  SeededRng rng(seed);

  // Audio: two random sinusoids per channel.
  const std::size_t A = sig.audio_channels;
  Tensor audio({frames, A});
  for (std::size_t c = 0; c < A; ++c) {
    for (int m = 0; m < 2; ++m) {
      const double omega = rng.uniform(0.15, 0.9);
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double amp = sig.audio_amplitude * rng.uniform(0.3, 1.0);
      for (std::size_t f = 0; f < frames; ++f) audio(f, c) += amp * std::sin(omega * static_cast<double>(f) + phase);
    }
  }

  MotionLatentSequence seq;
  seq.coeffs[index_of(Factor::kLip)] = world.lip_from_audio(audio);

  Tensor pose({frames, dims.pose});
  for (std::size_t j = 0; j < dims.pose; ++j) {
    double p = 0.5 * rng.normal();
    double v = 0.0;
    for (std::size_t f = 0; f < frames; ++f) {
      v = sig.pose_momentum * v + sig.pose_step * rng.normal();
      p = sig.pose_persistence * p + v;
      pose(f, j) = p;
    }
  }
  seq.coeffs[index_of(Factor::kPose)] = pose;

  Tensor eye({frames, dims.eye});
  {
    std::vector<double> current(dims.eye);
    for (auto& e : current) e = rng.normal();
    for (std::size_t f = 0; f < frames; ++f) {
      if (f > 0 && rng.bernoulli(sig.eye_jump_rate))
        for (auto& e : current) e = rng.normal();
      for (std::size_t j = 0; j < dims.eye; ++j) eye(f, j) = current[j];
    }
  }
  seq.coeffs[index_of(Factor::kEye)] = eye;
  seq.coeffs[index_of(Factor::kResidual)] = rng.normal_tensor({frames, dims.residual}, sig.residual_std);
  seq.latents = world.spaces().compose(seq.coeffs);

  ConditionSequence cond;
  cond.audio_channels = A;
  cond.pose_channels = dims.pose;
  cond.eye_channels = dims.eye;
  cond.channels = Tensor({frames, world.condition_dim()});
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t c = 0; c < A; ++c) cond.channels(f, c) = audio(f, c);
    for (std::size_t j = 0; j < dims.pose; ++j) cond.channels(f, A + j) = pose(f, j);
    for (std::size_t j = 0; j < dims.eye; ++j) cond.channels(f, A + dims.pose + j) = eye(f, j);
  }
  return {std::move(seq), std::move(cond)};
}

Tensor composite_anchor(const Tensor& v1, const Tensor& v2, const FactorSpaces& spaces) {
  if (v1.cols() != spaces.latent_dim() || v2.cols() != spaces.latent_dim() || v1.size() != v2.size()) {
    throw DimensionError("composite_anchor: frames must share the latent dimension");
  }
  const Tensor a = v1.ndim() == 1 ? v1.reshaped({1, v1.size()}) : v1;
  const Tensor b = v2.ndim() == 1 ? v2.reshaped({1, v2.size()}) : v2;
  const Tensor eye1 = spaces.project(Factor::kEye, a);
  const Tensor eye2 = spaces.project(Factor::kEye, b);
  Tensor out = b;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += eye1[i] - eye2[i];
  return v1.ndim() == 1 ? out.reshaped(v1.shape()) : out;
}

Tensor edit_factor(const Tensor& latents, Factor f, const Tensor& new_coeffs, const FactorSpaces& spaces) {
  const Tensor old_coeffs = spaces.coefficients(f, latents);
  require_same_shape(old_coeffs, new_coeffs, "edit_factor");
  Tensor delta = old_coeffs;
  for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = new_coeffs[i] - old_coeffs[i];
  const Tensor shift = matmul(delta, transpose(spaces[f].basis));
  Tensor out = latents;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += shift[i];
  return out;
}

}  // namespace demo::motion
