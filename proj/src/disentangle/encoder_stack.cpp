#include "demo/disentangle/encoder_stack.hpp"

#include <json.hpp>

#include "demo/core/error.hpp"
#include "demo/core/param_io.hpp"

namespace demo::disentangle {

namespace {

Mlp make(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
         SeededRng& rng) {
  return Mlp::create(ps, name, {in, hidden, hidden, out}, rng, Activation::kTanh);
}

nlohmann::json config_json(const EncoderConfig& c) {
  return {{"latent_dim", c.latent_dim}, {"audio_dim", c.audio_dim}, {"motion_dim", c.motion_dim},
          {"hidden", c.hidden},         {"eye_dim", c.eye_dim},     {"lip_dim", c.lip_dim},
          {"variational", c.variational}};
}

}  // namespace

EncoderStack::EncoderStack(const EncoderConfig& config, std::uint64_t seed) : config_(config) {
  const auto& c = config_;
  if (c.latent_dim == 0 || c.audio_dim == 0 || c.motion_dim == 0 || c.hidden == 0 || c.eye_dim == 0 ||
      c.lip_dim == 0) {
    throw ConfigError("encoder widths must be positive");
  }
  SeededRng rng(seed);
  mot_ = make(params_, "E_mot", c.latent_dim, c.hidden, c.motion_dim, rng);
  eye_ = make(params_, "E_eye", c.motion_dim, c.hidden, c.eye_dim, rng);
  pose_ = make(params_, "E_pose", c.motion_dim, c.hidden, 6, rng);
  lip_ = make(params_, "E_lip", c.motion_dim, c.hidden, c.lip_dim, rng);
  aud_ = make(params_, "E_aud", c.audio_dim, c.hidden, c.lip_dim, rng);
  dec_ = make(params_, "G", c.motion_dim, c.hidden, c.latent_dim, rng);
  if (c.variational) log_std_ = &params_.add("E_mot.log_std", Tensor({1, c.motion_dim}, -1.0));
}

Var EncoderStack::motion(Tape& t, Var latents) const { return mot_.forward(t, latents); }
Var EncoderStack::eye(Tape& t, Var m) const { return eye_.forward(t, m); }
Var EncoderStack::pose(Tape& t, Var m) const { return pose_.forward(t, m); }
Var EncoderStack::lip(Tape& t, Var m) const { return lip_.forward(t, m); }
Var EncoderStack::audio(Tape& t, Var a) const { return aud_.forward(t, a); }
Var EncoderStack::decode(Tape& t, Var m) const { return dec_.forward(t, m); }

Var EncoderStack::log_std(Tape& t) const {
  if (!log_std_) throw Error("log_std: stack is not variational");
  return t.parameter(*log_std_);
}

Tensor EncoderStack::encode(const Tensor& x) const {
  return infer([&](Tape& t, Var v) { return motion(t, v); }, x);
}
Tensor EncoderStack::decode(const Tensor& m) const {
  return infer([&](Tape& t, Var v) { return decode(t, v); }, m);
}
Tensor EncoderStack::eye_features(const Tensor& x) const {
  return infer([&](Tape& t, Var v) { return eye(t, motion(t, v)); }, x);
}
Tensor EncoderStack::lip_features(const Tensor& x) const {
  return infer([&](Tape& t, Var v) { return lip(t, motion(t, v)); }, x);
}
Tensor EncoderStack::pose_params(const Tensor& x) const {
  return infer([&](Tape& t, Var v) { return pose(t, motion(t, v)); }, x);
}
Tensor EncoderStack::audio_features(const Tensor& a) const {
  return infer([&](Tape& t, Var v) { return audio(t, v); }, a);
}

std::string EncoderStack::manifest_json() const {
  return nlohmann::json{{"kind", "encoder_stack"}, {"config", config_json(config_)}}.dump();
}

void EncoderStack::save(const std::string& path) const { write_params(path, params_, manifest_json()); }

EncoderStack EncoderStack::load(const std::string& path) {
  auto pf = read_params(path);
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(pf.manifest);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": bad manifest: " + e.what());
  }
  if (m.value("kind", "") != "encoder_stack") throw FormatError(path + ": not an encoder stack");
  const auto& j = m.at("config");
  EncoderConfig c;
  c.latent_dim = j.at("latent_dim");
  c.audio_dim = j.at("audio_dim");
  c.motion_dim = j.at("motion_dim");
  c.hidden = j.at("hidden");
  c.eye_dim = j.at("eye_dim");
  c.lip_dim = j.at("lip_dim");
  c.variational = j.at("variational");
  EncoderStack s(c, 0);
  assign_params(s.params_, pf.params);
  return s;
}

}  // namespace demo::disentangle
