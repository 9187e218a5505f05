#include "demo/harness/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "demo/core/error.hpp"
#include "demo/harness/manifest.hpp"

namespace demo::harness {

namespace {

std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  double v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw std::invalid_argument("expected a number");
  return v;
}

std::uint64_t parse_uint(const std::string& s) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw std::invalid_argument("expected a non-negative integer");
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw std::invalid_argument("expected true or false");
}

struct Key {
  std::string section, name;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <class Get>
Key size_key(std::string sec, std::string name, Get g) {
  return {sec, name, [g](const ExperimentConfig& c) { return std::to_string(g(const_cast<ExperimentConfig&>(c))); },
          [g](ExperimentConfig& c, const std::string& v) { g(c) = static_cast<std::size_t>(parse_uint(v)); }};
}
template <class Get>
Key u64_key(std::string sec, std::string name, Get g) {
  return {sec, name, [g](const ExperimentConfig& c) { return std::to_string(g(const_cast<ExperimentConfig&>(c))); },
          [g](ExperimentConfig& c, const std::string& v) { g(c) = parse_uint(v); }};
}
template <class Get>
Key real_key(std::string sec, std::string name, Get g) {
  return {sec, name, [g](const ExperimentConfig& c) { return num(g(const_cast<ExperimentConfig&>(c))); },
          [g](ExperimentConfig& c, const std::string& v) { g(c) = parse_double(v); }};
}
template <class E>
Key enum_key(std::string sec, std::string name, std::function<E&(ExperimentConfig&)> g,
             std::vector<std::pair<E, std::string>> names) {
  return {sec, name,
          [g, names](const ExperimentConfig& c) {
            const E v = g(const_cast<ExperimentConfig&>(c));
            for (const auto& [e, s] : names)
              if (e == v) return s;
            return std::string("?");
          },
          [g, names](ExperimentConfig& c, const std::string& v) {
            for (const auto& [e, s] : names) {
              if (s == v) {
                g(c) = e;
                return;
              }
            }
            std::string opts;
            for (const auto& [e, s] : names) opts += (opts.empty() ? "" : "|") + s;
            throw std::invalid_argument("expected one of " + opts);
          }};
}

const std::vector<Key>& keys() {
  using C = ExperimentConfig;
  static const std::vector<Key> k = {
      {"run", "preset", [](const C& c) { return c.preset; }, [](C& c, const std::string& v) { c.preset = v; }},
      enum_key<Task>("run", "task", [](C& c) -> Task& { return c.task; },
                     {{Task::kMotion, "motion"}, {Task::kConstantShift, "constant-shift"}}),
      u64_key("run", "seed", [](C& c) -> std::uint64_t& { return c.seed; }),

      size_key("world", "latent_dim", [](C& c) -> std::size_t& { return c.world.latent_dim; }),
      size_key("world", "lip", [](C& c) -> std::size_t& { return c.world.dims.lip; }),
      size_key("world", "pose", [](C& c) -> std::size_t& { return c.world.dims.pose; }),
      size_key("world", "eye", [](C& c) -> std::size_t& { return c.world.dims.eye; }),
      size_key("world", "residual", [](C& c) -> std::size_t& { return c.world.dims.residual; }),
      size_key("world", "phi_dim", [](C& c) -> std::size_t& { return c.world.phi_dim; }),
      size_key("world", "psi_dim", [](C& c) -> std::size_t& { return c.world.psi_dim; }),
      u64_key("world", "seed", [](C& c) -> std::uint64_t& { return c.world.seed; }),
      size_key("world", "audio_channels", [](C& c) -> std::size_t& { return c.world.signal.audio_channels; }),
      enum_key<motion::LipMode>("world", "lip_mode", [](C& c) -> motion::LipMode& { return c.world.signal.lip_mode; },
                                {{motion::LipMode::kLinear, "linear"}, {motion::LipMode::kNonlinear, "nonlinear"}}),
      real_key("world", "audio_amplitude", [](C& c) -> double& { return c.world.signal.audio_amplitude; }),
      real_key("world", "pose_persistence", [](C& c) -> double& { return c.world.signal.pose_persistence; }),
      real_key("world", "pose_momentum", [](C& c) -> double& { return c.world.signal.pose_momentum; }),
      real_key("world", "pose_step", [](C& c) -> double& { return c.world.signal.pose_step; }),
      real_key("world", "eye_jump_rate", [](C& c) -> double& { return c.world.signal.eye_jump_rate; }),
      real_key("world", "residual_std", [](C& c) -> double& { return c.world.signal.residual_std; }),

      enum_key<disentangle::Objective>(
          "encoder", "objective", [](C& c) -> disentangle::Objective& { return c.encoder.objective; },
          {{disentangle::Objective::kFcme, "fcme"}, {disentangle::Objective::kVae, "vae"}}),
      size_key("encoder", "motion_dim", [](C& c) -> std::size_t& { return c.encoder.encoder.motion_dim; }),
      size_key("encoder", "hidden", [](C& c) -> std::size_t& { return c.encoder.encoder.hidden; }),
      size_key("encoder", "eye_dim", [](C& c) -> std::size_t& { return c.encoder.encoder.eye_dim; }),
      size_key("encoder", "lip_dim", [](C& c) -> std::size_t& { return c.encoder.encoder.lip_dim; }),
      size_key("encoder", "steps", [](C& c) -> std::size_t& { return c.encoder.steps; }),
      size_key("encoder", "batch", [](C& c) -> std::size_t& { return c.encoder.batch; }),
      real_key("encoder", "lr", [](C& c) -> double& { return c.encoder.lr; }),
      real_key("encoder", "temperature", [](C& c) -> double& { return c.encoder.temperature; }),
      real_key("encoder", "vae_beta", [](C& c) -> double& { return c.encoder.vae_beta; }),
      size_key("encoder", "pool_sequences", [](C& c) -> std::size_t& { return c.encoder.pool_sequences; }),
      size_key("encoder", "pool_frames", [](C& c) -> std::size_t& { return c.encoder.pool_frames; }),

      size_key("field", "h", [](C& c) -> std::size_t& { return c.field.h; }),
      size_key("field", "heads", [](C& c) -> std::size_t& { return c.field.heads; }),
      size_key("field", "layers", [](C& c) -> std::size_t& { return c.field.layers; }),
      size_key("field", "T", [](C& c) -> std::size_t& { return c.field.T; }),
      size_key("field", "time_dim", [](C& c) -> std::size_t& { return c.field.time_dim; }),
      size_key("field", "d", [](C& c) -> std::size_t& { return c.field.d; }),

      enum_key<flow::Baseline>("flow", "baseline", [](C& c) -> flow::Baseline& { return c.flow.baseline; },
                               {{flow::Baseline::kFlow, "flow"}, {flow::Baseline::kDdpm, "ddpm"}}),
      enum_key<flow::CouplingMethod>(
          "flow", "coupling", [](C& c) -> flow::CouplingMethod& { return c.flow.coupling; },
          {{flow::CouplingMethod::kExact, "exact"},
           {flow::CouplingMethod::kGreedy, "greedy"},
           {flow::CouplingMethod::kNone, "none"}}),
      real_key("flow", "lambda_ot", [](C& c) -> double& { return c.flow.lambda_ot; }),
      real_key("flow", "lambda_vel", [](C& c) -> double& { return c.flow.lambda_vel; }),
      real_key("flow", "lr", [](C& c) -> double& { return c.flow.lr; }),
      size_key("flow", "batch", [](C& c) -> std::size_t& { return c.flow.batch; }),
      size_key("flow", "steps", [](C& c) -> std::size_t& { return c.flow.steps; }),
      real_key("flow", "sigma_min", [](C& c) -> double& { return c.flow.sigma_min; }),
      real_key("flow", "context_dropout", [](C& c) -> double& { return c.context_dropout; }),
      size_key("flow", "data_sequences", [](C& c) -> std::size_t& { return c.data_sequences; }),
      size_key("flow", "data_frames", [](C& c) -> std::size_t& { return c.data_frames; }),
      {"flow", "shift",
       [](const C& c) {
         std::string s;
         for (double v : c.shift) s += (s.empty() ? "" : " ") + num(v);
         return s;
       },
       [](C& c, const std::string& v) {
         c.shift.clear();
         std::istringstream is(v);
         std::string tok;
         while (is >> tok) c.shift.push_back(parse_double(tok));
       }},

      enum_key<sampler::SamplerKind>("sampler", "kind", [](C& c) -> sampler::SamplerKind& { return c.solver.kind; },
                                     {{sampler::SamplerKind::kEuler, "euler"}, {sampler::SamplerKind::kDdpm, "ddpm"}}),
      size_key("sampler", "steps", [](C& c) -> std::size_t& { return c.solver.steps; }),
      size_key("sampler", "window", [](C& c) -> std::size_t& { return c.solver.window; }),
      size_key("sampler", "context", [](C& c) -> std::size_t& { return c.solver.context; }),

      size_key("eval", "sequences", [](C& c) -> std::size_t& { return c.eval.sequences; }),
      size_key("eval", "frames", [](C& c) -> std::size_t& { return c.eval.frames; }),
      {"eval", "edits", [](const C& c) { return std::string(c.eval.edits ? "true" : "false"); },
       [](C& c, const std::string& v) { c.eval.edits = parse_bool(v); }},
      size_key("eval", "shift_probes", [](C& c) -> std::size_t& { return c.eval.shift_probes; }),
  };
  return k;
}

}  // namespace

void ExperimentConfig::finalize() {
  solver.validate();
  if (task == Task::kMotion) {
    field.d = encoder.encoder.motion_dim;
    field.cond_dim = world.signal.audio_channels + world.dims.pose + world.dims.eye;
    field.context_frames = solver.context;
    encoder.encoder.latent_dim = world.latent_dim;
    encoder.encoder.audio_dim = world.signal.audio_channels;
    if (eval.frames < solver.new_frames()) throw ConfigError("eval.frames must cover at least one segment");
    if (data_frames < solver.window) throw ConfigError("flow.data_frames must be at least sampler.window");
    if (context_dropout < 0 || context_dropout > 1) throw ConfigError("flow.context_dropout must be in [0, 1]");
  } else {
    field.cond_dim = 0;
    field.context_frames = 0;
    if (solver.context != 0) throw ConfigError("constant-shift task has no preceding context");
    if (!shift.empty() && shift.size() != field.d) throw ConfigError("flow.shift must list field.d values");
  }
  field.F = solver.new_frames();
  encoder.seed = seed;
  flow.seed = seed;
  field.validate();
  if (flow.baseline == flow::Baseline::kDdpm) solver.kind = sampler::SamplerKind::kDdpm;
}

std::vector<std::string> preset_names() { return {"desk", "fcme-flow", "vae-flow", "fcme-diff", "micro-shift", "paper"}; }

ExperimentConfig make_preset(const std::string& name) {
  ExperimentConfig c;
  c.preset = name;
  if (name == "desk" || name == "fcme-flow") {
    // defaults
  } else if (name == "vae-flow") {
    c.encoder.objective = disentangle::Objective::kVae;
  } else if (name == "fcme-diff") {
    c.flow.baseline = flow::Baseline::kDdpm;
    c.solver.kind = sampler::SamplerKind::kDdpm;
  } else if (name == "micro-shift") {
    c.task = Task::kConstantShift;
    c.field = field::micro_preset();
    c.flow.lr = 1e-3;
    c.flow.steps = 3000;
    c.solver.window = c.field.F;
    c.solver.context = 0;
  } else if (name == "paper") {
    c.world.latent_dim = 512;
    c.encoder.encoder.motion_dim = 512;
    c.encoder.encoder.hidden = 1024;
    c.field = field::paper_preset();
    c.solver.window = 50;
    c.solver.context = 10;
    c.flow.steps = 20000;
    c.eval.frames = 100;
  } else {
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
  }
  return c;
}

ExperimentConfig parse_config(const std::string& text, const ExperimentConfig& base) {
  ExperimentConfig c = base;
  std::istringstream is(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      bool known = false;
      for (const auto& k : keys()) known = known || k.section == section;
      if (!known) throw ConfigError(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (section.empty()) throw ConfigError(where + ": key '" + key + "' outside any section");
    const Key* found = nullptr;
    for (const auto& k : keys())
      if (k.section == section && k.name == key) found = &k;
    if (!found) throw ConfigError(where + ": unknown key '" + section + "." + key + "'");
    try {
      found->set(c, value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where + ": key '" + section + "." + key + "': " + e.what() + ", got '" + value + "'");
    }
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, const ExperimentConfig& base) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), base);
}

std::string serialize_config(const ExperimentConfig& config) {
  std::string out = "# demo experiment config, format_version=1\n";
  std::string section;
  for (const auto& k : keys()) {
    if (k.section != section) {
      section = k.section;
      out += "\n[" + section + "]\n";
    }
    out += k.name + " = " + k.get(config) + "\n";
  }
  return out;
}

std::string config_hash(const ExperimentConfig& config) { return sha1_hex(serialize_config(config)).substr(0, 16); }

}  // namespace demo::harness
