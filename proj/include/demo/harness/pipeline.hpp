#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "demo/disentangle/encoder_stack.hpp"
#include "demo/disentangle/trainer.hpp"
#include "demo/eval/metrics.hpp"
#include "demo/field/field_net.hpp"
#include "demo/flow/flow.hpp"
#include "demo/harness/config.hpp"
#include "demo/harness/manifest.hpp"
#include "demo/motion/sequence_io.hpp"
#include "demo/motion/world.hpp"

namespace demo::harness {

/// Per-dimension standardization of stage-1 motion features, so the flow
/// starts from N(0, I) noise against unit-scale targets.
struct FeatureNorm {
  Tensor mean;  ///< 1 x m
  Tensor std;   ///< 1 x m

  /// Fits on the pooled rows; dimensions with zero spread get std 1.
  static FeatureNorm fit(const std::vector<Tensor>& features);
  static FeatureNorm identity(std::size_t m);
  Tensor apply(const Tensor& x) const;
  Tensor invert(const Tensor& z) const;

  void save(const std::filesystem::path& path) const;
  static FeatureNorm load(const std::filesystem::path& path);
};

/// Training windows cut from encoded sequences: `context` preceding frames
/// then window - context target frames with their condition rows. With
/// probability `dropout` the context is zeroed, matching the cold start of
/// the first generated segment.
class MotionWindowSource : public flow::BatchSource {
 public:
  MotionWindowSource(std::vector<Tensor> features, std::vector<Tensor> conditions, std::size_t window,
                     std::size_t context, double dropout);
  flow::FlowBatch sample(SeededRng& rng, std::size_t batch) const override;

 private:
  std::vector<Tensor> features_, conditions_;
  std::size_t window_, context_;
  double dropout_;
};

struct Stage1 {
  std::shared_ptr<const disentangle::EncoderStack> stack;
  std::vector<disentangle::LossRecord> history;
  double seconds = 0.0;
};

/// A trained (or freshly initialized) two-stage model.
struct Model {
  ExperimentConfig config;
  Stage1 stage1;  ///< empty stack for the constant-shift task
  std::shared_ptr<field::FieldNet> net;
  FeatureNorm norm;
  std::vector<flow::StepRecord> history;
  double seconds = 0.0;  ///< stage-2 wall clock
};

using Progress = std::function<void(const std::string&)>;

/// Stage 1 only. Depends on the world, encoder sections and seed.
Stage1 train_stage1(const ExperimentConfig& config, const motion::MotionWorld& world);

/// Stage 2 on top of a frozen stage 1. For the constant-shift task `stage1`
/// is ignored. A divergence is rethrown after `on_divergence` (if set) has
/// seen the last-good model.
Model train_stage2(const ExperimentConfig& config, const motion::MotionWorld& world, Stage1 stage1,
                   const std::function<void(const Model&)>& on_divergence = {});

/// Held-out probe of a stage-1 stack on a fresh pool of 64 x 16 frames
/// drawn from `seed`.
disentangle::ProbeReport probe_stage1(const disentangle::EncoderStack& stack, const motion::MotionWorld& world,
                                      std::uint64_t seed);

/// Both stages.
Model train_model(const ExperimentConfig& config, const Progress& progress = {});

/// Run directory layout written by save_model:
///   config.ini, stage1.bin, stage1_loss.csv, stage1_loss.svg,
///   stage2.bin, feature_norm.bin, stage2_loss.csv, stage2_loss.svg
/// (stage-1 files are absent for the constant-shift task). Entries are added
/// to `manifest`.
void save_model(const Model& model, const std::filesystem::path& dir, RunManifest& manifest);
/// Throws ConfigError when checkpoint shapes disagree with config.ini.
Model load_model(const std::filesystem::path& dir);

/// Ground truth and generated motion for one set of driving conditions.
struct SampleSet {
  std::vector<motion::SequenceFile> generated;
  std::vector<motion::SequenceFile> reference;
  /// Per target factor: sequences regenerated with that factor's condition
  /// channels taken from the next sequence (lip edits swap audio).
  std::map<motion::Factor, std::vector<motion::SequenceFile>> edits;
};

struct SampleRequest {
  std::size_t sequences = 0;  ///< 0 = config.eval.sequences
  std::size_t frames = 0;     ///< 0 = config.eval.frames
  std::optional<std::size_t> steps;  ///< overrides sampler.steps
  std::uint64_t seed = 0;
  bool edits = false;
};

SampleSet sample_model(const Model& model, const SampleRequest& request);

/// Condition rows with one factor's channels replaced from `donor`.
/// Lip maps to the audio channels; residual has none and throws ConfigError.
Tensor swap_condition_channels(const motion::ConditionSequence& layout, const Tensor& base, const Tensor& donor,
                               motion::Factor factor);

/// Metric columns, in order: latent_fd, pose_fd, sync_distance, sync_floor,
/// smoothness, reference_smoothness, seam_ratio, max_boundary_jump,
/// median_intra_jump, seam_ratio_raw, then when edits are present leak_diag,
/// leak_offdiag, eye_edit_ratio. sync_floor and reference_smoothness are
/// measured on the reference set. The seam columns skip frames where the eye
/// condition channels jump; seam_ratio_raw keeps every frame.
eval::MetricsReport evaluate_samples(const motion::MotionWorld& world, const SampleSet& samples,
                                     std::size_t segment_frames, const std::string& config_hash, std::uint64_t seed);

/// Constant-shift task: max over `probes` random (x_t, t) of ||v - b||_inf.
double shift_field_error(const Model& model, std::size_t probes, std::uint64_t seed);

/// Train then evaluate one cell; rows of an ablation table.
struct CellResult {
  std::string cell;
  std::uint64_t seed = 0;
  ExperimentConfig config;
  eval::MetricsReport report;
  double seconds = 0.0;
};

/// Applies a cell's defining knobs on top of `base`.
ExperimentConfig cell_config(const std::string& cell, const ExperimentConfig& base);

using CellCallback = std::function<void(const CellResult&, const Model&)>;

/// Every cell at every seed. Cells whose stage-1 configuration coincides
/// reuse one stage-1 run per seed. When `out` is non-empty each cell-seed
/// run is saved under out/<cell>/seed_<s>/. `on_cell` sees each finished
/// cell together with its trained model.
std::vector<CellResult> run_ablation(const std::vector<std::string>& cells, const std::vector<std::uint64_t>& seeds,
                                     const ExperimentConfig& base, const std::filesystem::path& out = {},
                                     const Progress& progress = {}, const CellCallback& on_cell = {});

/// Columns: format_version,cell,seed,config_hash,<metric columns>.
std::string ablation_csv(const std::vector<CellResult>& results);

}  // namespace demo::harness
