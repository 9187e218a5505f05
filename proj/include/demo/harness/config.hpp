#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "demo/disentangle/trainer.hpp"
#include "demo/field/field_net.hpp"
#include "demo/flow/flow.hpp"
#include "demo/motion/world.hpp"
#include "demo/sampler/sampler.hpp"

namespace demo::harness {

enum class Task { kMotion, kConstantShift };

struct EvalConfig {
  std::size_t sequences = 32;        ///< generated test sequences (the sync probe is fit on their ground truth)
  std::size_t frames = 48;           ///< frames per test sequence
  bool edits = true;                 ///< ablation cells also generate edit sets (leakage metrics)
  std::size_t shift_probes = 100;    ///< constant-shift task: random (x_t, t) probes
};

/// Everything one run needs. Derived fields (field.d, field.F, field.cond_dim,
/// field.context_frames, encoder dims) are filled by finalize() and are not
/// serialized.
struct ExperimentConfig {
  std::string preset = "desk";
  Task task = Task::kMotion;
  std::uint64_t seed = 1;

  motion::WorldConfig world;
  disentangle::TrainerConfig encoder;
  field::PredictorConfig field = field::desk_preset();
  flow::TrainConfig flow;
  double context_dropout = 0.1;
  std::size_t data_sequences = 256;
  std::size_t data_frames = 64;
  sampler::SolverConfig solver;
  EvalConfig eval;
  std::vector<double> shift;  ///< constant-shift task: b (empty = drawn from the seed)

  /// Fills derived fields and validates. Throws ConfigError.
  void finalize();
};

std::vector<std::string> preset_names();
/// Throws ConfigError for an unknown name.
ExperimentConfig make_preset(const std::string& name);

/// Sectioned key = value text. Unknown sections/keys and malformed values
/// raise ConfigError naming the line and key. Keys absent from the text keep
/// the values of `base`.
ExperimentConfig parse_config(const std::string& text, const ExperimentConfig& base = ExperimentConfig{});
ExperimentConfig load_config(const std::filesystem::path& path, const ExperimentConfig& base = ExperimentConfig{});
/// Canonical text: every key, fixed order, values printed losslessly.
std::string serialize_config(const ExperimentConfig& config);
/// First 16 hex digits of the SHA-1 of serialize_config().
std::string config_hash(const ExperimentConfig& config);

}  // namespace demo::harness
