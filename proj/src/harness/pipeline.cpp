#include "demo/harness/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "demo/core/error.hpp"
#include "demo/core/param_io.hpp"
#include "demo/core/rng.hpp"
#include "demo/harness/plot.hpp"
#include "demo/sampler/sampler.hpp"

namespace demo::harness {

using motion::Factor;

namespace {

// Fork streams of the run seed.
constexpr std::uint64_t kStreamData = 21;
constexpr std::uint64_t kStreamShift = 22;
constexpr std::uint64_t kStreamEvalSeqs = 31;
constexpr std::uint64_t kStreamEvalNoise = 32;
constexpr std::uint64_t kStreamProbe = 41;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string read_text(const std::filesystem::path& p) {
  std::ifstream is(p);
  if (!is) throw ConfigError("cannot read " + p.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Tensor shift_tensor(const ExperimentConfig& cfg) {
  if (!cfg.shift.empty()) return Tensor({1, cfg.shift.size()}, cfg.shift);
  SeededRng rng = SeededRng(cfg.seed).fork(kStreamShift);
  return rng.uniform_tensor({1, cfg.field.d}, -1.0, 1.0);
}

motion::SequenceFile make_file(const ExperimentConfig& cfg, Tensor latents, Tensor conditions, std::uint64_t seed) {
  motion::SequenceFile f;
  f.latent_dim = cfg.world.latent_dim;
  f.dims = cfg.world.dims;
  f.audio_channels = cfg.world.signal.audio_channels;
  f.seed = seed;
  f.world_seed = cfg.world.seed;
  f.latents = std::move(latents);
  f.conditions = std::move(conditions);
  return f;
}

std::string loss_svg(const std::string& title, const std::vector<Series>& series) {
  return svg_line_chart(series, {.title = title, .x_label = "step", .y_label = "loss", .log_y = true});
}

}  // namespace

// ---------------------------------------------------------------------------
// FeatureNorm

FeatureNorm FeatureNorm::fit(const std::vector<Tensor>& features) {
  if (features.empty()) throw ConfigError("feature norm needs data");
  const std::size_t m = features.front().cols();
  std::vector<double> s(m, 0.0), ss(m, 0.0);
  double n = 0;
  for (const auto& t : features) {
    for (std::size_t r = 0; r < t.rows(); ++r) {
      for (std::size_t c = 0; c < m; ++c) s[c] += t(r, c);
      n += 1;
    }
  }
  FeatureNorm norm{Tensor({1, m}), Tensor({1, m})};
  for (std::size_t c = 0; c < m; ++c) norm.mean[c] = s[c] / n;
  for (const auto& t : features)
    for (std::size_t r = 0; r < t.rows(); ++r)
      for (std::size_t c = 0; c < m; ++c) ss[c] += (t(r, c) - norm.mean[c]) * (t(r, c) - norm.mean[c]);
  for (std::size_t c = 0; c < m; ++c) {
    const double sd = std::sqrt(ss[c] / std::max(1.0, n - 1));
    norm.std[c] = sd > 1e-12 ? sd : 1.0;
  }
  return norm;
}

FeatureNorm FeatureNorm::identity(std::size_t m) { return {Tensor({1, m}, 0.0), Tensor({1, m}, 1.0)}; }

Tensor FeatureNorm::apply(const Tensor& x) const {
  if (x.cols() != mean.cols()) throw DimensionError("feature norm: width mismatch");
  Tensor z = x;
  for (std::size_t r = 0; r < z.rows(); ++r)
    for (std::size_t c = 0; c < z.cols(); ++c) z(r, c) = (z(r, c) - mean[c]) / std[c];
  return z;
}

Tensor FeatureNorm::invert(const Tensor& z) const {
  if (z.cols() != mean.cols()) throw DimensionError("feature norm: width mismatch");
  Tensor x = z;
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) x(r, c) = x(r, c) * std[c] + mean[c];
  return x;
}

void FeatureNorm::save(const std::filesystem::path& path) const {
  ParameterSet ps;
  ps.add("mean", mean);
  ps.add("std", std);
  write_params(path, ps, R"({"kind":"feature_norm"})");
}

FeatureNorm FeatureNorm::load(const std::filesystem::path& path) {
  auto pf = read_params(path);
  if (pf.manifest.find("feature_norm") == std::string::npos) throw FormatError(path.string() + ": not a feature norm");
  return {pf.params.get("mean").value, pf.params.get("std").value};
}

// ---------------------------------------------------------------------------
// MotionWindowSource

MotionWindowSource::MotionWindowSource(std::vector<Tensor> features, std::vector<Tensor> conditions,
                                       std::size_t window, std::size_t context, double dropout)
    : features_(std::move(features)),
      conditions_(std::move(conditions)),
      window_(window),
      context_(context),
      dropout_(dropout) {
  if (features_.empty() || features_.size() != conditions_.size())
    throw ConfigError("window source: need matching non-empty feature and condition lists");
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].rows() < window_ || conditions_[i].rows() != features_[i].rows())
      throw DimensionError("window source: sequence " + std::to_string(i) + " is shorter than a window");
  }
}

flow::FlowBatch MotionWindowSource::sample(SeededRng& rng, std::size_t batch) const {
  const std::size_t F = window_ - context_, m = features_.front().cols(), c = conditions_.front().cols();
  flow::FlowBatch b;
  b.x1 = Tensor({batch * F, m});
  b.cond = Tensor({batch * F, c});
  if (context_ > 0) b.context = Tensor({batch, context_ * m});
  for (std::size_t w = 0; w < batch; ++w) {
    const std::size_t s = rng.below(features_.size());
    const std::size_t start = rng.below(features_[s].rows() - window_ + 1);
    const bool drop = context_ > 0 && rng.bernoulli(dropout_);
    const auto& feat = features_[s];
    std::copy_n(feat.row(start + context_).begin(), F * m, b.x1.row(w * F).begin());
    std::copy_n(conditions_[s].row(start + context_).begin(), F * c, b.cond.row(w * F).begin());
    if (context_ > 0 && !drop) std::copy_n(feat.row(start).begin(), context_ * m, b.context.row(w).begin());
  }
  b.x0 = rng.normal_tensor({batch * F, m});
  return b;
}

// ---------------------------------------------------------------------------
// Training

Stage1 train_stage1(const ExperimentConfig& config, const motion::MotionWorld& world) {
  const auto t0 = std::chrono::steady_clock::now();
  auto result = disentangle::train_disentangler(config.encoder, world);
  Stage1 s;
  s.stack = std::make_shared<const disentangle::EncoderStack>(std::move(result.stack));
  s.history = std::move(result.history);
  s.seconds = seconds_since(t0);
  return s;
}

Model train_stage2(const ExperimentConfig& config, const motion::MotionWorld& world, Stage1 stage1,
                   const std::function<void(const Model&)>& on_divergence) {
  const auto t0 = std::chrono::steady_clock::now();
  Model model;
  model.config = config;
  model.net = std::make_shared<field::FieldNet>(config.field, SeededRng(config.seed).fork(kStreamData + 100).next_u64());

  std::unique_ptr<flow::BatchSource> source;
  if (config.task == Task::kConstantShift) {
    const Tensor b = shift_tensor(config);
    model.config.shift = b.storage();
    model.norm = FeatureNorm::identity(config.field.d);
    source = std::make_unique<flow::ConstantShiftSource>(config.field.F, b);
  } else {
    if (!stage1.stack) throw ConfigError("motion task needs a stage-1 encoder stack");
    model.stage1 = stage1;
    SeededRng seeds = SeededRng(config.seed).fork(kStreamData);
    std::vector<Tensor> features, conditions;
    for (std::size_t i = 0; i < config.data_sequences; ++i) {
      auto [seq, cond] = motion::synthesize_sequence(config.data_frames, world, seeds.next_u64());
      features.push_back(stage1.stack->encode(seq.latents));
      conditions.push_back(std::move(cond.channels));
    }
    model.norm = FeatureNorm::fit(features);
    for (auto& f : features) f = model.norm.apply(f);
    source = std::make_unique<MotionWindowSource>(std::move(features), std::move(conditions), config.solver.window,
                                                  config.solver.context, config.context_dropout);
  }

  flow::FlowTrainer trainer(*model.net, config.flow);
  try {
    trainer.run(*source);
  } catch (const DivergenceError&) {
    model.history = trainer.history();
    model.seconds = seconds_since(t0);
    if (on_divergence) on_divergence(model);
    throw;
  }
  model.history = trainer.history();
  model.seconds = seconds_since(t0);
  return model;
}

disentangle::ProbeReport probe_stage1(const disentangle::EncoderStack& stack, const motion::MotionWorld& world,
                                      std::uint64_t seed) {
  const auto pool = disentangle::build_frame_pool(world, 64, 16, SeededRng(seed).fork(kStreamProbe).next_u64());
  return disentangle::probe_heads(stack, pool);
}

Model train_model(const ExperimentConfig& config, const Progress& progress) {
  const motion::MotionWorld world(config.world);
  Stage1 s1;
  if (config.task == Task::kMotion) {
    if (progress) progress("stage 1: disentangler, " + std::to_string(config.encoder.steps) + " steps");
    s1 = train_stage1(config, world);
  }
  if (progress) progress("stage 2: field net, " + std::to_string(config.flow.steps) + " steps");
  return train_stage2(config, world, s1);
}

void save_model(const Model& model, const std::filesystem::path& dir, RunManifest& manifest) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "config.ini", serialize_config(model.config));
  manifest.add(dir, "config.ini", "config");
  if (model.stage1.stack) {
    model.stage1.stack->save((dir / "stage1.bin").string());
    manifest.add(dir, "stage1.bin", "checkpoint");
    std::ostringstream csv;
    disentangle::write_loss_csv(csv, model.stage1.history);
    write_file_atomic(dir / "stage1_loss.csv", csv.str());
    manifest.add(dir, "stage1_loss.csv", "loss_csv");
    Series mot{"l_mot", {}, {}}, eye{"l_eye", {}, {}}, pose{"l_pose", {}, {}}, a2v{"l_a2v", {}, {}},
        tot{"total", {}, {}};
    for (const auto& r : model.stage1.history) {
      const double x = static_cast<double>(r.step);
      for (auto* s : {&mot, &eye, &pose, &a2v, &tot}) s->x.push_back(x);
      mot.y.push_back(r.mot);
      eye.y.push_back(r.eye);
      pose.y.push_back(r.pose);
      a2v.y.push_back(r.a2v);
      tot.y.push_back(r.total);
    }
    write_file_atomic(dir / "stage1_loss.svg", loss_svg("stage 1 losses", {tot, mot, eye, pose, a2v}));
    manifest.add(dir, "stage1_loss.svg", "plot");
  }
  model.net->save((dir / "stage2.bin").string());
  manifest.add(dir, "stage2.bin", "checkpoint");
  model.norm.save(dir / "feature_norm.bin");
  manifest.add(dir, "feature_norm.bin", "checkpoint");
  std::ostringstream csv;
  flow::write_loss_csv(csv, model.history);
  write_file_atomic(dir / "stage2_loss.csv", csv.str());
  manifest.add(dir, "stage2_loss.csv", "loss_csv");
  Series cfm{"l_cfm", {}, {}}, vel{"l_vel", {}, {}}, tot{"total", {}, {}};
  for (const auto& r : model.history) {
    const double x = static_cast<double>(r.step);
    for (auto* s : {&cfm, &vel, &tot}) s->x.push_back(x);
    cfm.y.push_back(r.l_cfm);
    vel.y.push_back(r.l_vel);
    tot.y.push_back(r.total);
  }
  write_file_atomic(dir / "stage2_loss.svg", loss_svg("stage 2 losses", {tot, cfm, vel}));
  manifest.add(dir, "stage2_loss.svg", "plot");
}

Model load_model(const std::filesystem::path& dir) {
  Model model;
  model.config = parse_config(read_text(dir / "config.ini"));
  model.config.finalize();
  const auto& cfg = model.config;
  if (cfg.task == Task::kMotion) {
    auto stack = disentangle::EncoderStack::load((dir / "stage1.bin").string());
    const auto& ec = stack.config();
    if (ec.latent_dim != cfg.world.latent_dim || ec.motion_dim != cfg.encoder.encoder.motion_dim ||
        ec.audio_dim != cfg.world.signal.audio_channels)
      throw ConfigError("stage-1 checkpoint does not match config.ini (latent/motion/audio dims)");
    model.stage1.stack = std::make_shared<const disentangle::EncoderStack>(std::move(stack));
  }
  model.net = std::make_shared<field::FieldNet>(field::FieldNet::load((dir / "stage2.bin").string()));
  const auto& nc = model.net->config();
  if (nc.d != cfg.field.d || nc.F != cfg.field.F || nc.cond_dim != cfg.field.cond_dim ||
      nc.context_frames != cfg.field.context_frames)
    throw ConfigError("stage-2 checkpoint (d=" + std::to_string(nc.d) + ", F=" + std::to_string(nc.F) +
                      ", cond=" + std::to_string(nc.cond_dim) + ", context=" + std::to_string(nc.context_frames) +
                      ") does not match config.ini (d=" + std::to_string(cfg.field.d) +
                      ", F=" + std::to_string(cfg.field.F) + ", cond=" + std::to_string(cfg.field.cond_dim) +
                      ", context=" + std::to_string(cfg.field.context_frames) + ")");
  model.norm = FeatureNorm::load(dir / "feature_norm.bin");
  if (model.norm.mean.cols() != nc.d) throw ConfigError("feature_norm.bin width does not match the field net");
  return model;
}

// ---------------------------------------------------------------------------
// Sampling and evaluation

Tensor swap_condition_channels(const motion::ConditionSequence& layout, const Tensor& base, const Tensor& donor,
                               Factor factor) {
  std::size_t offset = 0, width = 0;
  switch (factor) {
    case Factor::kLip: offset = 0, width = layout.audio_channels; break;
    case Factor::kPose: offset = layout.pose_offset(), width = layout.pose_channels; break;
    case Factor::kEye: offset = layout.eye_offset(), width = layout.eye_channels; break;
    case Factor::kResidual: throw ConfigError("the residual factor has no condition channels");
  }
  require_same_shape(base, donor, "swap_condition_channels");
  Tensor out = base;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = offset; c < offset + width; ++c) out(r, c) = donor(r, c);
  return out;
}

SampleSet sample_model(const Model& model, const SampleRequest& req) {
  const auto& cfg = model.config;
  if (cfg.task != Task::kMotion) throw ConfigError("sampling needs a motion-task model");
  const std::size_t n = req.sequences ? req.sequences : cfg.eval.sequences;
  const std::size_t frames = req.frames ? req.frames : cfg.eval.frames;
  if (req.edits && n < 2) throw ConfigError("edit mode needs at least 2 sequences");
  sampler::SolverConfig solver = cfg.solver;
  if (req.steps) solver.steps = *req.steps;

  const motion::MotionWorld world(cfg.world);
  SeededRng seq_seeds = SeededRng(req.seed).fork(kStreamEvalSeqs);
  SeededRng noise_seeds = SeededRng(req.seed).fork(kStreamEvalNoise);
  std::vector<motion::ConditionSequence> layouts;
  std::vector<Tensor> conds;
  std::vector<std::uint64_t> gen_seeds;
  SampleSet out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t s = seq_seeds.next_u64();
    auto [seq, cond] = motion::synthesize_sequence(frames, world, s);
    out.reference.push_back(make_file(cfg, seq.latents, cond.channels, s));
    conds.push_back(cond.channels);
    layouts.push_back(std::move(cond));
    gen_seeds.push_back(noise_seeds.next_u64());
  }

  const auto run = [&](const std::vector<Tensor>& c) {
    auto feats = sampler::generate(*model.net, c, frames, solver, gen_seeds);
    std::vector<motion::SequenceFile> files;
    for (std::size_t i = 0; i < n; ++i)
      files.push_back(make_file(cfg, model.stage1.stack->decode(model.norm.invert(feats[i])), c[i], gen_seeds[i]));
    return files;
  };
  out.generated = run(conds);
  if (req.edits) {
    for (Factor f : {Factor::kLip, Factor::kPose, Factor::kEye}) {
      std::vector<Tensor> edited;
      for (std::size_t i = 0; i < n; ++i)
        edited.push_back(swap_condition_channels(layouts[i], conds[i], conds[(i + 1) % n], f));
      out.edits[f] = run(edited);
    }
  }
  return out;
}

eval::MetricsReport evaluate_samples(const motion::MotionWorld& world, const SampleSet& samples,
                                     std::size_t segment_frames, const std::string& config_hash, std::uint64_t seed) {
  const auto& spaces = world.spaces();
  if (samples.generated.empty() || samples.reference.empty()) throw ConfigError("evaluation needs sequences");
  const auto check = [&](const motion::SequenceFile& f, const char* what) {
    if (f.latent_dim != world.latent_dim() || f.dims != world.config().dims ||
        f.audio_channels != world.config().signal.audio_channels || f.conditions.cols() != world.condition_dim())
      throw DimensionError(std::string(what) + " sequence dims do not match the world configuration");
  };
  std::size_t gen_rows = 0, ref_rows = 0;
  for (const auto& f : samples.generated) check(f, "generated"), gen_rows += f.frames();
  for (const auto& f : samples.reference) check(f, "reference"), ref_rows += f.frames();

  const auto pool = [](const std::vector<motion::SequenceFile>& fs, std::size_t rows, bool conditions) {
    const std::size_t w = conditions ? fs.front().conditions.cols() : fs.front().latents.cols();
    Tensor out({rows, w});
    std::size_t r = 0;
    for (const auto& f : fs) {
      const Tensor& src = conditions ? f.conditions : f.latents;
      std::copy_n(src.data().begin(), src.size(), out.row(r).begin());
      r += src.rows();
    }
    return out;
  };
  const Tensor gen = pool(samples.generated, gen_rows, false), ref = pool(samples.reference, ref_rows, false);
  const Tensor ref_cond = pool(samples.reference, ref_rows, true);

  eval::MetricsReport report;
  report.config_hash = config_hash;
  report.seed = seed;
  report.n_generated = samples.generated.size();
  report.n_reference = samples.reference.size();

  report.add("latent_fd", eval::frechet_distance(eval::GaussianSummary::fit(gen), eval::GaussianSummary::fit(ref)));
  report.add("pose_fd", eval::frechet_distance(eval::GaussianSummary::fit(spaces.coefficients(Factor::kPose, gen)),
                                               eval::GaussianSummary::fit(spaces.coefficients(Factor::kPose, ref))));

  Tensor ref_audio({ref_rows, world.config().signal.audio_channels});
  for (std::size_t r = 0; r < ref_rows; ++r)
    std::copy_n(ref_cond.row(r).begin(), ref_audio.cols(), ref_audio.row(r).begin());
  const auto probe = eval::SyncProbe::fit(ref_audio, spaces.coefficients(Factor::kLip, ref));
  const auto mean_over = [](const std::vector<motion::SequenceFile>& fs, auto fn) {
    double s = 0;
    for (const auto& f : fs) s += fn(f);
    return s / static_cast<double>(fs.size());
  };
  report.add("sync_distance", mean_over(samples.generated, [&](const motion::SequenceFile& f) {
               return eval::sync_distance(f.latents, f.conditions, spaces, probe);
             }));
  report.add("sync_floor", mean_over(samples.reference, [&](const motion::SequenceFile& f) {
               return eval::sync_distance(f.latents, f.conditions, spaces, probe);
             }));
  report.add("smoothness",
             mean_over(samples.generated, [](const motion::SequenceFile& f) { return eval::smoothness(f.latents); }));
  report.add("reference_smoothness",
             mean_over(samples.reference, [](const motion::SequenceFile& f) { return eval::smoothness(f.latents); }));

  // Eye conditions are piecewise constant with sudden jumps; a boundary that
  // lands on one is content, not a seam, so those frames are left out.
  std::vector<Tensor> seqs;
  std::vector<std::vector<unsigned char>> driven;
  const std::size_t eye0 = world.config().signal.audio_channels + world.config().dims.pose;
  for (const auto& f : samples.generated) {
    seqs.push_back(f.latents);
    std::vector<unsigned char> skip(f.frames(), 0);
    for (std::size_t r = 1; r < f.frames(); ++r)
      for (std::size_t c = eye0; c < f.conditions.cols(); ++c) skip[r] |= f.conditions(r, c) != f.conditions(r - 1, c);
    driven.push_back(std::move(skip));
  }
  const auto seams = eval::seam_stats(seqs, segment_frames, driven);
  report.add("seam_ratio", seams.ratio);
  report.add("max_boundary_jump", seams.max_boundary_jump);
  report.add("median_intra_jump", seams.median_intra_jump);
  report.add("seam_ratio_raw", eval::seam_stats(seqs, segment_frames).ratio);

  if (!samples.edits.empty()) {
    std::vector<eval::EditPair> pairs;
    for (const auto& [f, edited] : samples.edits) {
      if (edited.size() != samples.generated.size()) throw DimensionError("edit set size differs from generated set");
      for (std::size_t i = 0; i < edited.size(); ++i) {
        check(edited[i], "edited");
        pairs.push_back({f, samples.generated[i].latents, edited[i].latents});
      }
    }
    const auto leak = eval::factor_leakage(pairs, spaces);
    report.add("leak_diag", leak.diagonal_mean());
    report.add("leak_offdiag", leak.off_diagonal_mean());
    if (leak.has_row(Factor::kEye)) {
      const auto& row = leak.leak[motion::index_of(Factor::kEye)];
      report.add("eye_edit_ratio", row[motion::index_of(Factor::kEye)] / row[motion::index_of(Factor::kPose)]);
    }
  }
  return report;
}

double shift_field_error(const Model& model, std::size_t probes, std::uint64_t seed) {
  const auto& cfg = model.config;
  if (cfg.task != Task::kConstantShift) throw ConfigError("shift probe needs a constant-shift model");
  const Tensor b({1, cfg.shift.size()}, cfg.shift);
  const std::size_t F = cfg.field.F, d = cfg.field.d;
  SeededRng rng(seed);
  double worst = 0;
  for (std::size_t p = 0; p < probes; ++p) {
    const double t = rng.uniform();
    Tensor x0 = rng.normal_tensor({F, d});
    Tensor x1 = x0;
    for (std::size_t r = 0; r < F; ++r)
      for (std::size_t c = 0; c < d; ++c) x1(r, c) += b[c];
    const auto s = flow::sample_path(x0, x1, t);
    const Tensor v = model.net->predict({s.xt, {t}, {}, {}});
    for (std::size_t r = 0; r < F; ++r)
      for (std::size_t c = 0; c < d; ++c) worst = std::max(worst, std::abs(v(r, c) - b[c]));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Ablation

ExperimentConfig cell_config(const std::string& cell, const ExperimentConfig& base) {
  ExperimentConfig c = base;
  c.preset = cell;
  c.task = Task::kMotion;
  if (cell == "fcme-flow") {
    c.encoder.objective = disentangle::Objective::kFcme;
    c.flow.baseline = flow::Baseline::kFlow;
    c.solver.kind = sampler::SamplerKind::kEuler;
  } else if (cell == "vae-flow") {
    c.encoder.objective = disentangle::Objective::kVae;
    c.flow.baseline = flow::Baseline::kFlow;
    c.solver.kind = sampler::SamplerKind::kEuler;
  } else if (cell == "fcme-diff") {
    c.encoder.objective = disentangle::Objective::kFcme;
    c.flow.baseline = flow::Baseline::kDdpm;
    c.solver.kind = sampler::SamplerKind::kDdpm;
  } else {
    throw ConfigError("unknown ablation cell '" + cell + "' (known: fcme-flow, vae-flow, fcme-diff)");
  }
  return c;
}

std::vector<CellResult> run_ablation(const std::vector<std::string>& cells, const std::vector<std::uint64_t>& seeds,
                                     const ExperimentConfig& base, const std::filesystem::path& out,
                                     const Progress& progress, const CellCallback& on_cell) {
  std::vector<ExperimentConfig> configs;
  for (const auto& cell : cells) configs.push_back(cell_config(cell, base));  // validate names up front
  const motion::MotionWorld world(base.world);
  std::vector<CellResult> results;
  for (std::uint64_t seed : seeds) {
    std::map<std::string, Stage1> stage1_cache;  // keyed by the stage-1 relevant config text
    for (std::size_t k = 0; k < cells.size(); ++k) {
      ExperimentConfig cfg = configs[k];
      cfg.seed = seed;
      cfg.finalize();
      const auto t0 = std::chrono::steady_clock::now();
      ExperimentConfig key_cfg = cfg;
      key_cfg.preset.clear();
      key_cfg.flow = {};
      key_cfg.solver = {};
      const std::string key = serialize_config(key_cfg);
      auto it = stage1_cache.find(key);
      if (it == stage1_cache.end()) {
        if (progress) progress(cells[k] + " seed " + std::to_string(seed) + ": stage 1");
        it = stage1_cache.emplace(key, train_stage1(cfg, world)).first;
      }
      if (progress) progress(cells[k] + " seed " + std::to_string(seed) + ": stage 2");
      Model model = train_stage2(cfg, world, it->second);
      if (progress) progress(cells[k] + " seed " + std::to_string(seed) + ": eval");
      SampleRequest req;
      req.seed = seed;
      req.edits = cfg.eval.edits;
      const auto samples = sample_model(model, req);
      CellResult r{cells[k], seed, cfg, evaluate_samples(world, samples, cfg.solver.new_frames(), config_hash(cfg), seed),
                   seconds_since(t0)};
      if (!out.empty()) {
        const auto dir = out / cells[k] / ("seed_" + std::to_string(seed));
        RunManifest manifest{"ablate", cells[k], config_hash(cfg), seed, r.seconds, {}};
        save_model(model, dir, manifest);
        write_file_atomic(dir / "metrics.csv", r.report.csv_header() + "\n" + r.report.csv_row() + "\n");
        manifest.add(dir, "metrics.csv", "metrics");
        write_file_atomic(dir / "metrics.json", r.report.json());
        manifest.add(dir, "metrics.json", "metrics");
        manifest.write(dir / "manifest.json");
      }
      if (on_cell) on_cell(r, model);
      results.push_back(std::move(r));
    }
  }
  return results;
}

std::string ablation_csv(const std::vector<CellResult>& results) {
  if (results.empty()) return "";
  std::string out = "format_version,cell,seed,config_hash";
  for (const auto& [name, v] : results.front().report.metrics) out += "," + name;
  out += "\n";
  for (const auto& r : results) {
    out += std::to_string(eval::kMetricsFormatVersion) + "," + r.cell + "," + std::to_string(r.seed) + "," +
           r.report.config_hash;
    for (const auto& [name, v] : results.front().report.metrics) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", r.report.get(name).value_or(std::nan("")));
      out += std::string(",") + buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace demo::harness
