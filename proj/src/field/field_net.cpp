#include "demo/field/field_net.hpp"

#include <cmath>
#include <json.hpp>

#include "demo/core/error.hpp"
#include "demo/core/param_io.hpp"

namespace demo::field {

void PredictorConfig::validate() const {
  if (d == 0 || h == 0 || heads == 0 || layers == 0 || F == 0) {
    throw ConfigError("predictor widths, heads, layers and F must be positive");
  }
  if (h % heads != 0) throw ConfigError("hidden width " + std::to_string(h) + " not divisible by heads");
  if (time_dim == 0 || time_dim % 2 != 0) throw ConfigError("time_dim must be positive and even");
}

PredictorConfig desk_preset() {
  PredictorConfig c;
  c.F = 12;
  c.context_frames = 4;
  return c;
}

PredictorConfig paper_preset() {
  PredictorConfig c;
  c.d = 512;
  c.h = 1024;
  c.heads = 8;
  c.F = 40;
  c.T = 10;
  c.time_dim = 64;
  c.context_frames = 10;
  return c;
}

PredictorConfig micro_preset() {
  PredictorConfig c;
  c.d = 4;
  c.h = 8;
  c.heads = 2;
  c.layers = 1;
  c.F = 3;
  c.T = 1;
  c.time_dim = 4;
  return c;
}

AttentionMask::AttentionMask(std::size_t frames, std::size_t half_window)
    : frames_(frames), T_(half_window), allow_(frames * frames, 0) {
  if (frames == 0) throw ConfigError("attention mask needs at least one frame");
  for (std::size_t f = 0; f < frames; ++f)
    for (std::size_t g = 0; g < frames; ++g) allow_[f * frames + g] = (f > g ? f - g : g - f) <= T_;
}

Tensor time_embedding(double t, std::size_t dim) {
  if (dim == 0 || dim % 2 != 0) throw DimensionError("time_embedding: dim must be positive and even");
  const std::size_t half = dim / 2;
  Tensor e({1, dim});
  for (std::size_t i = 0; i < half; ++i) {
    const double w = half == 1 ? 1.0 : std::pow(1000.0, static_cast<double>(i) / static_cast<double>(half - 1));
    e[i] = std::sin(w * t);
    e[half + i] = std::cos(w * t);
  }
  return e;
}

Var frame_adaln(Var x, Var gamma, Var beta) { return ops::add(ops::mul(gamma, ops::layer_norm(x)), beta); }

Var gate(Var x, Var alpha) { return ops::mul(alpha, x); }

FieldNet::FieldNet(const PredictorConfig& config, std::uint64_t seed)
    : config_((config.validate(), config)), mask_(config.F, config.T) {
  const auto& c = config_;
  SeededRng rng(seed);
  in_proj_ = Linear::create(params_, "in_proj", c.d, c.h, rng);
  cond1_ = Linear::create(params_, "cond.0", c.cond_dim + c.time_dim, c.h, rng);
  cond2_ = Linear::create(params_, "cond.1", c.h, c.h, rng);
  if (c.context_frames > 0) ctx_proj_ = Linear::create(params_, "context", c.context_frames * c.d, c.h, rng);
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::string p = "blocks." + std::to_string(l) + ".";
    Block b;
    b.mod = Linear::create(params_, p + "mod", c.h, 6 * c.h, rng);
    // Columns are [gamma1 beta1 alpha1 gamma2 beta2 alpha2]. Gates start
    // closed and scales start at one, so every block begins as the identity
    // while the gate gradients are nonzero.
    auto& w = b.mod.weight->value;
    auto& bias = b.mod.bias->value;
    for (std::size_t r = 0; r < c.h; ++r) {
      for (std::size_t j = 0; j < c.h; ++j) {
        w(r, 2 * c.h + j) = 0.0;
        w(r, 5 * c.h + j) = 0.0;
        w(r, j) *= 0.1;
        w(r, 3 * c.h + j) *= 0.1;
      }
    }
    for (std::size_t j = 0; j < c.h; ++j) {
      bias(0, j) = 1.0;
      bias(0, 3 * c.h + j) = 1.0;
    }
    b.qkv = Linear::create(params_, p + "qkv", c.h, 3 * c.h, rng);
    b.attn_out = Linear::create(params_, p + "attn_out", c.h, c.h, rng);
    b.mlp1 = Linear::create(params_, p + "mlp.0", c.h, 4 * c.h, rng);
    b.mlp2 = Linear::create(params_, p + "mlp.1", 4 * c.h, c.h, rng);
    blocks_.push_back(b);
  }
  out_proj_ = Linear::create(params_, "out_proj", c.h, c.d, rng, Init::kZero);
}

void FieldNet::check(const FieldInput& in, const Shape& xs) const {
  const auto& c = config_;
  const std::size_t B = in.batch();
  if (B == 0) throw DimensionError("field input: need at least one flow time");
  for (double t : in.t) {
    if (!(t >= 0.0 && t <= 1.0)) throw DimensionError("field input: flow time " + std::to_string(t) + " outside [0,1]");
  }
  if (xs != Shape{B * c.F, c.d}) {
    throw DimensionError("field input: x has shape " + shape_str(xs) + ", expected " +
                         shape_str({B * c.F, c.d}));
  }
  if (c.cond_dim > 0 && in.cond.shape() != Shape{B * c.F, c.cond_dim}) {
    throw DimensionError("field input: cond has shape " + shape_str(in.cond.shape()) + ", expected " +
                         shape_str({B * c.F, c.cond_dim}));
  }
  if (c.context_frames > 0 && in.context.shape() != Shape{B, c.context_frames * c.d}) {
    throw DimensionError("field input: context has shape " + shape_str(in.context.shape()) + ", expected " +
                         shape_str({B, c.context_frames * c.d}));
  }
}

Var FieldNet::embed(Tape& tape, const FieldInput& in) const {
  const auto& c = config_;
  const std::size_t B = in.batch();
  Tensor temb({B, c.time_dim});
  for (std::size_t b = 0; b < B; ++b) {
    const Tensor e = time_embedding(in.t[b], c.time_dim);
    std::copy(e.data().begin(), e.data().end(), temb.row(b).begin());
  }
  Var frame_in = ops::repeat_rows(tape.constant(temb), c.F);
  if (c.cond_dim > 0) frame_in = ops::concat_cols({tape.constant(in.cond), frame_in});
  Var e = cond2_.forward(tape, ops::gelu(cond1_.forward(tape, frame_in)));
  if (c.context_frames > 0) {
    e = ops::add(e, ops::repeat_rows(ctx_proj_.forward(tape, tape.constant(in.context)), c.F));
  }
  return e;
}

Modulation FieldNet::modulation(Tape& tape, Var c, std::size_t layer) const {
  if (c.cols() != config_.h) throw DimensionError("modulation: condition width must equal h");
  const Var m = blocks_.at(layer).mod.forward(tape, c);
  const std::size_t h = config_.h;
  return {ops::slice_cols(m, 0, h),     ops::slice_cols(m, h, h),     ops::slice_cols(m, 2 * h, h),
          ops::slice_cols(m, 3 * h, h), ops::slice_cols(m, 4 * h, h), ops::slice_cols(m, 5 * h, h)};
}

Var FieldNet::block(Tape& tape, Var hs, Var c, std::size_t layer, std::size_t batch) const {
  const auto& b = blocks_.at(layer);
  const std::size_t h = config_.h;
  const Modulation mod = modulation(tape, c, layer);

  const Var a = frame_adaln(hs, mod.gamma1, mod.beta1);
  const Var qkv = b.qkv.forward(tape, a);
  const Var att = ops::attention(ops::slice_cols(qkv, 0, h), ops::slice_cols(qkv, h, h),
                                 ops::slice_cols(qkv, 2 * h, h), mask_.data(), batch, config_.F, config_.heads);
  hs = ops::add(hs, gate(b.attn_out.forward(tape, att), mod.alpha1));

  const Var m = frame_adaln(hs, mod.gamma2, mod.beta2);
  const Var mlp = b.mlp2.forward(tape, ops::gelu(b.mlp1.forward(tape, m)));
  return ops::add(hs, gate(mlp, mod.alpha2));
}

Var FieldNet::forward(Tape& tape, Var x, const FieldInput& in) const {
  check(in, x.shape());
  const Var c = embed(tape, in);
  Var hs = in_proj_.forward(tape, x);
  for (std::size_t l = 0; l < blocks_.size(); ++l) hs = block(tape, hs, c, l, in.batch());
  return out_proj_.forward(tape, hs);
}

Var FieldNet::forward(Tape& tape, const FieldInput& in) const { return forward(tape, tape.constant(in.x), in); }

Tensor FieldNet::predict(const FieldInput& in) const {
  Tape tape;
  return forward(tape, in).value();
}

namespace {

nlohmann::json to_json(const PredictorConfig& c) {
  return {{"d", c.d},   {"h", c.h},         {"heads", c.heads},       {"layers", c.layers},
          {"T", c.T},   {"F", c.F},         {"time_dim", c.time_dim}, {"cond_dim", c.cond_dim},
          {"context_frames", c.context_frames}};
}

}  // namespace

std::string FieldNet::manifest_json() const {
  return nlohmann::json{{"kind", "field_net"}, {"config", to_json(config_)}}.dump();
}

void FieldNet::save(const std::string& path) const { write_params(path, params_, manifest_json()); }

FieldNet FieldNet::load(const std::string& path) {
  auto pf = read_params(path);
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(pf.manifest);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": bad manifest: " + e.what());
  }
  if (m.value("kind", "") != "field_net") throw FormatError(path + ": not a field net");
  const auto& j = m.at("config");
  PredictorConfig c;
  c.d = j.at("d");
  c.h = j.at("h");
  c.heads = j.at("heads");
  c.layers = j.at("layers");
  c.T = j.at("T");
  c.F = j.at("F");
  c.time_dim = j.at("time_dim");
  c.cond_dim = j.at("cond_dim");
  c.context_frames = j.at("context_frames");
  FieldNet net(c, 0);
  assign_params(net.params_, pf.params);
  return net;
}

}  // namespace demo::field
