// Command-line front end: train, sample, eval, ablate, gradcheck, probe.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "demo/core/error.hpp"
#include "demo/harness/config.hpp"
#include "demo/harness/gradient_suite.hpp"
#include "demo/harness/manifest.hpp"
#include "demo/harness/pipeline.hpp"
#include "demo/harness/plot.hpp"
#include "demo/motion/sequence_io.hpp"

namespace fs = std::filesystem;
using namespace demo;
using namespace demo::harness;

namespace {

constexpr const char* kOutRootEnv = "DEMO_OUT_ROOT";

struct Common {
  std::string preset = "desk";
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps;
  std::string out;
};

void add_common(CLI::App* app, Common& c, bool with_steps = true) {
  app->add_option("--preset", c.preset, "starting preset")->check(CLI::IsMember(preset_names()));
  app->add_option("--config", c.config, "config file applied over the preset")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "run seed (overrides [run] seed)");
  if (with_steps) app->add_option("--steps", c.steps, "training steps for both stages (overrides the config)");
  app->add_option("--out", c.out, std::string("output directory (default: $") + kOutRootEnv + "/<command>-<preset>-seed<seed>)");
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = make_preset(c.preset);
  if (!c.config.empty()) cfg = load_config(c.config, cfg);
  if (c.seed) cfg.seed = *c.seed;
  if (c.steps) cfg.encoder.steps = cfg.flow.steps = *c.steps;
  cfg.finalize();
  return cfg;
}

fs::path out_dir(const std::string& explicit_out, const std::string& command, const std::string& preset,
                 std::uint64_t seed) {
  if (!explicit_out.empty()) return explicit_out;
  const char* root = std::getenv(kOutRootEnv);
  return fs::path(root && *root ? root : "runs") / (command + "-" + preset + "-seed" + std::to_string(seed));
}

void log(const std::string& msg) { std::cerr << "[demo] " << msg << "\n"; }

std::string seq_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "seq_%04zu.csv", i);
  return buf;
}

void write_metrics(const eval::MetricsReport& report, const fs::path& dir, RunManifest& manifest) {
  write_file_atomic(dir / "metrics.csv", report.csv_header() + "\n" + report.csv_row() + "\n");
  manifest.add(dir, "metrics.csv", "metrics");
  write_file_atomic(dir / "metrics.json", report.json());
  manifest.add(dir, "metrics.json", "metrics");
}

void print_metrics(const eval::MetricsReport& report) {
  for (const auto& [name, v] : report.metrics) std::printf("  %-22s %.6g\n", name.c_str(), v);
}

std::vector<motion::SequenceFile> read_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("no sequence files in " + dir.string());
  std::vector<motion::SequenceFile> out;
  for (const auto& f : files) out.push_back(motion::read_sequence(f));
  return out;
}

// ---------------------------------------------------------------------------

int cmd_train(const Common& c) {
  const ExperimentConfig cfg = resolve(c);
  const auto dir = out_dir(c.out, "train", cfg.preset, cfg.seed);
  const auto t0 = std::chrono::steady_clock::now();
  log("train preset=" + cfg.preset + " seed=" + std::to_string(cfg.seed) + " config_hash=" + config_hash(cfg) +
      " -> " + dir.string());
  Model model;
  const motion::MotionWorld world(cfg.world);
  Stage1 s1;
  if (cfg.task == Task::kMotion) {
    log("stage 1: disentangler, " + std::to_string(cfg.encoder.steps) + " steps");
    s1 = train_stage1(cfg, world);
  }
  log("stage 2: field net, " + std::to_string(cfg.flow.steps) + " steps");
  try {
    model = train_stage2(cfg, world, s1, [&](const Model& last_good) {
      RunManifest m{"train (diverged)", cfg.preset, config_hash(cfg), cfg.seed, 0.0, {}};
      save_model(last_good, dir, m);
      m.write(dir / "manifest.json");
    });
  } catch (const DivergenceError& e) {
    log(std::string(e.what()) + "; last-good checkpoint written to " + dir.string());
    return 3;
  }
  RunManifest manifest{"train", cfg.preset, config_hash(cfg), cfg.seed, 0.0, {}};
  save_model(model, dir, manifest);
  if (cfg.task == Task::kConstantShift) {
    eval::MetricsReport report;
    report.config_hash = config_hash(cfg);
    report.seed = cfg.seed;
    report.add("final_cfm_loss", model.history.empty() ? 0.0 : model.history.back().l_cfm);
    report.add("shift_field_error", shift_field_error(model, cfg.eval.shift_probes, cfg.seed + 1));
    write_metrics(report, dir, manifest);
    print_metrics(report);
  } else if (model.stage1.stack) {
    const auto probe = probe_stage1(*model.stage1.stack, world, cfg.seed);
    std::printf("  stage-1 probe: eye gap %.4f, lip gap %.4f\n", probe.eye_gap(), probe.lip_gap());
  }
  manifest.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest.write(dir / "manifest.json");
  log("done in " + std::to_string(manifest.wall_seconds) + " s");
  return 0;
}

struct SampleArgs {
  std::string model;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps;
  std::size_t sequences = 0;
  std::size_t frames = 0;
  bool edits = false;
  bool svg = false;
  std::string out;
};

int cmd_sample(const SampleArgs& a) {
  const Model model = load_model(a.model);
  const auto& cfg = model.config;
  SampleRequest req;
  req.sequences = a.sequences;
  req.frames = a.frames;
  req.steps = a.steps;
  req.seed = a.seed.value_or(cfg.seed);
  req.edits = a.edits;
  const auto dir = out_dir(a.out, "sample", cfg.preset, req.seed);
  const auto t0 = std::chrono::steady_clock::now();
  log("sample from " + a.model + " -> " + dir.string());
  const SampleSet set = sample_model(model, req);

  RunManifest manifest{"sample", cfg.preset, config_hash(cfg), req.seed, 0.0, {}};
  fs::create_directories(dir);
  write_file_atomic(dir / "config.ini", serialize_config(cfg));
  manifest.add(dir, "config.ini", "config");
  const auto dump = [&](const std::vector<motion::SequenceFile>& files, const std::string& sub) {
    for (std::size_t i = 0; i < files.size(); ++i) {
      const std::string rel = sub + "/" + seq_name(i);
      fs::create_directories(dir / sub);
      std::ostringstream os;
      motion::write_sequence(os, files[i]);
      write_file_atomic(dir / rel, os.str());
      manifest.add(dir, rel, "sequence");
    }
  };
  dump(set.generated, "generated");
  dump(set.reference, "reference");
  for (const auto& [f, files] : set.edits) dump(files, "edits/" + std::string(motion::factor_name(f)));

  if (a.svg) {
    const motion::MotionWorld world(cfg.world);
    for (std::size_t i = 0; i < std::min<std::size_t>(set.generated.size(), 4); ++i) {
      std::vector<Series> series;
      for (auto f : {motion::Factor::kLip, motion::Factor::kPose, motion::Factor::kEye}) {
        const Tensor gen = world.spaces().coefficients(f, set.generated[i].latents);
        const Tensor ref = world.spaces().coefficients(f, set.reference[i].latents);
        Series g{std::string(motion::factor_name(f)) + "[0] generated", {}, {}};
        Series r{std::string(motion::factor_name(f)) + "[0] reference", {}, {}};
        for (std::size_t k = 0; k < gen.rows(); ++k) {
          g.x.push_back(static_cast<double>(k));
          g.y.push_back(gen(k, 0));
          r.x.push_back(static_cast<double>(k));
          r.y.push_back(ref(k, 0));
        }
        series.push_back(std::move(g));
        series.push_back(std::move(r));
      }
      const std::string rel = "plots/seq_" + std::to_string(i) + ".svg";
      fs::create_directories(dir / "plots");
      write_file_atomic(dir / rel, svg_line_chart(series, {.title = "factor coefficients, sequence " + std::to_string(i),
                                                           .x_label = "frame",
                                                           .y_label = "coefficient"}));
      manifest.add(dir, rel, "plot");
    }
  }
  manifest.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest.write(dir / "manifest.json");
  std::printf("wrote %zu generated sequences (%zu frames) to %s\n", set.generated.size(),
              set.generated.front().frames(), dir.string().c_str());
  return 0;
}

struct EvalArgs {
  std::string in, generated, reference, edits, config, out;
  std::size_t segment = 0;
};

int cmd_eval(const EvalArgs& a) {
  const fs::path in = a.in;
  const fs::path gen_dir = !a.generated.empty() ? fs::path(a.generated) : in / "generated";
  const fs::path ref_dir = !a.reference.empty() ? fs::path(a.reference) : in / "reference";
  const fs::path edit_dir = !a.edits.empty() ? fs::path(a.edits) : in / "edits";
  const fs::path cfg_path = !a.config.empty() ? fs::path(a.config) : in / "config.ini";
  if (gen_dir.empty() || ref_dir.empty() || !fs::exists(cfg_path))
    throw ConfigError("eval needs --in <sample dir> or --generated/--reference/--config");
  ExperimentConfig cfg = load_config(cfg_path);
  cfg.finalize();
  const motion::MotionWorld world(cfg.world);

  SampleSet set;
  set.generated = read_dir(gen_dir);
  set.reference = read_dir(ref_dir);
  if (fs::is_directory(edit_dir)) {
    for (auto f : {motion::Factor::kLip, motion::Factor::kPose, motion::Factor::kEye}) {
      const auto sub = edit_dir / motion::factor_name(f);
      if (fs::is_directory(sub)) set.edits[f] = read_dir(sub);
    }
  }
  const std::size_t segment = a.segment ? a.segment : cfg.solver.new_frames();
  const auto t0 = std::chrono::steady_clock::now();
  const auto report = evaluate_samples(world, set, segment, config_hash(cfg), cfg.seed);
  const fs::path dir = !a.out.empty() ? fs::path(a.out) : (!in.empty() ? in : out_dir("", "eval", cfg.preset, cfg.seed));
  fs::create_directories(dir);
  RunManifest manifest{"eval", cfg.preset, config_hash(cfg), cfg.seed, 0.0, {}};
  write_metrics(report, dir, manifest);
  manifest.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest.write(dir / "eval_manifest.json");
  print_metrics(report);
  return 0;
}

struct AblateArgs {
  Common common;
  std::vector<std::string> cells{"fcme-flow", "vae-flow", "fcme-diff"};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
};

int cmd_ablate(const AblateArgs& a) {
  Common c = a.common;
  ExperimentConfig base = make_preset(c.preset);
  if (!c.config.empty()) base = load_config(c.config, base);
  if (c.steps) base.encoder.steps = base.flow.steps = *c.steps;
  const auto dir = out_dir(c.out, "ablate", c.preset, a.seeds.front());
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = run_ablation(a.cells, a.seeds, base, dir, log);
  const std::string csv = ablation_csv(results);
  write_file_atomic(dir / "ablation.csv", csv);
  RunManifest manifest{"ablate", c.preset, config_hash(cell_config(a.cells.front(), base)), a.seeds.front(), 0.0, {}};
  manifest.add(dir, "ablation.csv", "metrics");
  for (const auto& r : results) {
    const std::string sub = r.cell + "/seed_" + std::to_string(r.seed) + "/manifest.json";
    manifest.add(dir, sub, "manifest");
  }
  manifest.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest.write(dir / "manifest.json");
  std::cout << csv;
  log("ablation done in " + std::to_string(manifest.wall_seconds) + " s -> " + dir.string());
  return 0;
}

int cmd_gradcheck() {
  const auto cases = run_gradient_suite();
  bool ok = true;
  for (const auto& g : cases) {
    std::printf("%-4s %-36s max_rel_err %.3e  tol %.0e  coords %zu\n", g.passed ? "ok" : "FAIL", g.name.c_str(),
                g.max_rel_error, g.tolerance, g.coordinates);
    ok = ok && g.passed;
  }
  std::printf("%zu cases, %s\n", cases.size(), ok ? "all passed" : "FAILURES");
  return ok ? 0 : 1;
}

int cmd_probe(const Common& c) {
  ExperimentConfig cfg = resolve(c);
  if (cfg.task != Task::kMotion) throw ConfigError("probe needs a motion-task preset");
  const auto dir = out_dir(c.out, "probe", cfg.preset, cfg.seed);
  const motion::MotionWorld world(cfg.world);
  log("stage 1: disentangler, " + std::to_string(cfg.encoder.steps) + " steps");
  const Stage1 s1 = train_stage1(cfg, world);
  const auto p = probe_stage1(*s1.stack, world, cfg.seed);
  nlohmann::ordered_json j;
  j["format_version"] = eval::kMetricsFormatVersion;
  j["config_hash"] = config_hash(cfg);
  j["seed"] = cfg.seed;
  j["steps"] = cfg.encoder.steps;
  const char* names[] = {"lip", "pose", "eye", "residual"};
  for (int k = 0; k < 4; ++k) {
    j["r2"]["eye_head"][names[k]] = p.eye[k];
    j["r2"]["lip_head"][names[k]] = p.lip[k];
    j["r2"]["pose_head"][names[k]] = p.pose[k];
  }
  j["eye_gap"] = p.eye_gap();
  j["lip_gap"] = p.lip_gap();
  fs::create_directories(dir);
  write_file_atomic(dir / "probe.json", j.dump(2) + "\n");
  std::printf("held-out R^2 (rows: head, columns: lip pose eye residual)\n");
  const auto row = [](const char* n, const std::array<double, 4>& r) {
    std::printf("  %-5s %8.4f %8.4f %8.4f %8.4f\n", n, r[0], r[1], r[2], r[3]);
  };
  row("eye", p.eye);
  row("lip", p.lip);
  row("pose", p.pose);
  std::printf("eye gap %.4f, lip gap %.4f (%.1f s)\n", p.eye_gap(), p.lip_gap(), s1.seconds);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Disentangled motion flow matching: training, sampling and evaluation"};
  app.require_subcommand(1);

  Common train_c;
  auto* train = app.add_subcommand("train", "stage-1 disentangler then stage-2 field net; writes checkpoints");
  add_common(train, train_c);

  SampleArgs sa;
  auto* sample = app.add_subcommand("sample", "generate sequences from a trained run directory");
  sample->add_option("--model", sa.model, "run directory written by train")->required()->check(CLI::ExistingDirectory);
  sample->add_option("--seed", sa.seed, "sampling seed (default: the run seed)");
  sample->add_option("--steps", sa.steps, "Euler steps per segment");
  sample->add_option("--sequences", sa.sequences, "number of sequences (default: [eval] sequences)");
  sample->add_option("--frames", sa.frames, "frames per sequence (default: [eval] frames)");
  sample->add_flag("--edits", sa.edits, "also regenerate with lip, pose and eye channels swapped");
  sample->add_flag("--svg", sa.svg, "write coefficient plots");
  sample->add_option("--out", sa.out, "output directory");

  EvalArgs ea;
  auto* evalc = app.add_subcommand("eval", "metrics for generated against reference sequences");
  evalc->add_option("--in", ea.in, "sample directory (generated/, reference/, edits/, config.ini)");
  evalc->add_option("--generated", ea.generated, "generated sequence directory");
  evalc->add_option("--reference", ea.reference, "reference sequence directory");
  evalc->add_option("--edits", ea.edits, "edit directory with lip/, pose/, eye/");
  evalc->add_option("--config", ea.config, "config.ini of the run");
  evalc->add_option("--segment", ea.segment, "frames per generated segment (default: from config)");
  evalc->add_option("--out", ea.out, "where metrics.csv/json go (default: --in)");

  AblateArgs aa;
  auto* ablate = app.add_subcommand("ablate", "fcme-flow / vae-flow / fcme-diff grid over shared seeds");
  add_common(ablate, aa.common);
  ablate->add_option("--cells", aa.cells, "cells to run")->delimiter(',');
  ablate->add_option("--seeds", aa.seeds, "seed replicates")->delimiter(',');

  app.add_subcommand("gradcheck", "autodiff against central differences for every op and the micro net");

  Common probe_c;
  auto* probe = app.add_subcommand("probe", "train stage 1 and report held-out linear-probe R^2");
  add_common(probe, probe_c);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return cmd_train(train_c);
    if (*sample) return cmd_sample(sa);
    if (*evalc) return cmd_eval(ea);
    if (*ablate) return cmd_ablate(aa);
    if (app.got_subcommand("gradcheck")) return cmd_gradcheck();
    if (*probe) return cmd_probe(probe_c);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
