#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "demo/core/nn.hpp"

namespace demo::field {

struct PredictorConfig {
  std::size_t d = 32;       ///< motion latent width
  std::size_t h = 64;       ///< hidden width
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t T = 4;        ///< attention half-window
  std::size_t F = 16;       ///< new frames per window (preceding context excluded)
  std::size_t time_dim = 16;
  std::size_t cond_dim = 0;        ///< condition channels per frame (0 = unconditional)
  std::size_t context_frames = 0;  ///< preceding latents folded into the embedding

  /// Throws ConfigError unless h % heads == 0, F >= 1 and widths are positive.
  void validate() const;
  bool operator==(const PredictorConfig&) const = default;
};

PredictorConfig desk_preset();   ///< d=32, h=64, heads=4, layers=2, T=4; 12 new + 4 context frames
PredictorConfig paper_preset();  ///< d=512, h=1024, heads=8; 40 new + 10 context frames
PredictorConfig micro_preset();  ///< F=3, d=4, h=8, heads=2, layers=1

/// Banded frame mask, allow[f, f'] = |f - f'| <= T, row-major F x F.
class AttentionMask {
 public:
  AttentionMask(std::size_t frames, std::size_t half_window);

  std::size_t frames() const { return frames_; }
  std::size_t half_window() const { return T_; }
  bool allowed(std::size_t f, std::size_t g) const { return allow_[f * frames_ + g] != 0; }
  std::span<const unsigned char> data() const { return allow_; }

 private:
  std::size_t frames_, T_;
  std::vector<unsigned char> allow_;
};

/// [sin(w_i t), cos(w_i t)] with w_i geometric from 1 to 1000; dim must be even.
Tensor time_embedding(double t, std::size_t dim);

/// gamma * LN(x) + beta, all three the same shape.
Var frame_adaln(Var x, Var gamma, Var beta);
/// alpha * x elementwise.
Var gate(Var x, Var alpha);

/// One network input: `batch` stacked windows of F frames each.
struct FieldInput {
  Tensor x;                 ///< (batch*F) x d
  std::vector<double> t;    ///< one flow time per window, in [0, 1]
  Tensor cond;              ///< (batch*F) x cond_dim, empty when cond_dim == 0
  Tensor context;           ///< batch x (context_frames*d), empty when context_frames == 0

  std::size_t batch() const { return t.size(); }
};

struct Modulation {
  Var gamma1, beta1, alpha1, gamma2, beta2, alpha2;
};

/// The vector-field transformer: input projection, L blocks of
/// [AdaLN -> masked attention -> gate -> residual; AdaLN -> MLP -> gate -> residual]
/// with per-frame modulation, then a zero-initialized output projection.
class FieldNet {
 public:
  FieldNet(const PredictorConfig& config, std::uint64_t seed);
  FieldNet(FieldNet&&) = default;
  FieldNet& operator=(FieldNet&&) = default;

  const PredictorConfig& config() const { return config_; }
  const AttentionMask& mask() const { return mask_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  /// Per-frame condition embedding, (batch*F) x h.
  Var embed(Tape& tape, const FieldInput& in) const;
  /// The six modulation vectors of block `layer` for every frame of `c`.
  Modulation modulation(Tape& tape, Var c, std::size_t layer) const;
  /// One block; `h` and `c` are (batch*F) x h.
  Var block(Tape& tape, Var h, Var c, std::size_t layer, std::size_t batch) const;
  /// Full field with `x` supplied as a Var so losses can differentiate through it.
  Var forward(Tape& tape, Var x, const FieldInput& in) const;
  Var forward(Tape& tape, const FieldInput& in) const;
  /// Frozen evaluation.
  Tensor predict(const FieldInput& in) const;

  std::string manifest_json() const;
  void save(const std::string& path) const;
  static FieldNet load(const std::string& path);

 private:
  void check(const FieldInput& in, const Shape& x_shape) const;

  PredictorConfig config_;
  AttentionMask mask_;
  ParameterSet params_;
  Linear in_proj_, cond1_, cond2_, ctx_proj_, out_proj_;
  struct Block {
    Linear mod, qkv, attn_out, mlp1, mlp2;
  };
  std::vector<Block> blocks_;
};

}  // namespace demo::field
