#include "demo/sampler/sampler.hpp"

#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

#include "demo/core/error.hpp"
#include "demo/core/linalg.hpp"

namespace demo::sampler {

Trajectory euler_integrate(const Field& field, const Tensor& x0, std::size_t steps) {
  if (steps == 0) throw ConfigError("euler_integrate: need at least one step");
  const double h = 1.0 / static_cast<double>(steps);
  Trajectory tr;
  tr.states.reserve(steps + 1);
  tr.times.reserve(steps + 1);
  tr.states.push_back(x0);
  tr.times.push_back(0.0);
  Tensor x = x0;
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(steps);
    const Tensor v = field(x, t);
    require_same_shape(v, x, "euler_integrate: field output");
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] += h * v[i];
      if (!std::isfinite(x[i])) {
        throw DivergenceError("euler_integrate: non-finite state at step " + std::to_string(k + 1) + " of " +
                              std::to_string(steps));
      }
    }
    tr.states.push_back(x);
    tr.times.push_back(static_cast<double>(k + 1) / static_cast<double>(steps));
  }
  return tr;
}

void SolverConfig::validate() const {
  if (steps == 0) throw ConfigError("solver steps must be >= 1");
  if (context >= window) throw ConfigError("solver context must be smaller than the window");
}

std::vector<Tensor> generate(const field::FieldNet& net, const std::vector<Tensor>& conditions, std::size_t frames,
                             const SolverConfig& config, const std::vector<std::uint64_t>& seeds) {
  config.validate();
  const auto& nc = net.config();
  const std::size_t n_new = config.new_frames();
  if (n_new != nc.F) {
    throw ConfigError("solver window - context = " + std::to_string(n_new) + " but the field net produces " +
                      std::to_string(nc.F) + " frames");
  }
  if (nc.context_frames != 0 && nc.context_frames != config.context) {
    throw ConfigError("solver context differs from the field net's context_frames");
  }
  if (frames < n_new) throw DimensionError("generate: need at least window - context frames");
  if (conditions.size() != seeds.size()) throw DimensionError("generate: one seed per condition sequence");
  const std::size_t B = seeds.size();
  for (const auto& c : conditions) {
    const std::size_t rows = nc.cond_dim == 0 ? (c.empty() ? frames : c.rows()) : c.rows();
    if (rows != frames || (nc.cond_dim > 0 && c.cols() != nc.cond_dim)) {
      throw DimensionError("generate: conditions must be " + std::to_string(frames) + " x " +
                           std::to_string(nc.cond_dim) + ", got " + shape_str(c.shape()));
    }
  }

  const std::size_t d = nc.d, K = nc.context_frames;
  std::vector<Tensor> out(B, Tensor({frames, d}));
  const std::size_t segments = (frames + n_new - 1) / n_new;
  const flow::DdpmSchedule schedule = flow::DdpmSchedule::linear();
  for (std::size_t s = 0; s < segments; ++s) {
    // The last segment may run past the end; it reuses the final condition
    // row for the overhang and the extra frames are dropped.
    const std::size_t start = s * n_new;
    flow::FlowBatch batch;
    if (nc.cond_dim > 0) {
      batch.cond = Tensor({B * n_new, nc.cond_dim});
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t f = 0; f < n_new; ++f) {
          const std::size_t src = std::min(start + f, frames - 1);
          std::copy_n(conditions[b].row(src).begin(), nc.cond_dim, batch.cond.row(b * n_new + f).begin());
        }
    }
    if (K > 0) {
      batch.context = Tensor({B, K * d});
      if (s > 0) {
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t k = 0; k < K; ++k)
            std::copy_n(out[b].row(start - K + k).begin(), d, batch.context.row(b).begin() + k * d);
      }
    }

    Tensor x({B * n_new, d});
    std::vector<SeededRng> rngs;
    for (std::size_t b = 0; b < B; ++b) {
      rngs.push_back(SeededRng(seeds[b]).fork(s));
      const Tensor z = rngs.back().normal_tensor({n_new, d});
      std::copy(z.data().begin(), z.data().end(), x.data().begin() + b * n_new * d);
    }

    Tensor result;
    if (config.kind == SamplerKind::kEuler) {
      const auto field = [&](const Tensor& xs, double t) {
        return net.predict(flow::make_input(batch, xs, std::vector<double>(B, t)));
      };
      result = euler_integrate(field, x, config.steps).final_state();
    } else {
      // One noise stream per sequence keeps the result batch-invariant.
      result = flow::ddpm_denoise(net, schedule, x, batch.cond, batch.context,
                                  [&](std::size_t w) { return rngs[w].normal(); });
    }

    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t f = 0; f < n_new && start + f < frames; ++f)
        std::copy_n(result.row(b * n_new + f).begin(), d, out[b].row(start + f).begin());
  }
  return out;
}

Tensor generate(const field::FieldNet& net, const Tensor& conditions, std::size_t frames, const SolverConfig& config,
                std::uint64_t seed) {
  return generate(net, std::vector<Tensor>{conditions}, frames, config, {seed}).front();
}

ConvergenceTable convergence_probe(const Eigen::MatrixXd& a, const Tensor& x0, const std::vector<std::size_t>& steps) {
  if (a.rows() != a.cols() || static_cast<std::size_t>(a.rows()) != x0.size()) {
    throw DimensionError("convergence_probe: A must be n x n with n = size of x0");
  }
  const Eigen::VectorXd start = Eigen::Map<const Eigen::VectorXd>(x0.data().data(), x0.size());
  const Eigen::VectorXd exact = a.exp() * start;
  const Field field = [&](const Tensor& x, double) {
    const Eigen::VectorXd v = a * Eigen::Map<const Eigen::VectorXd>(x.data().data(), x.size());
    return Tensor(x.shape(), std::vector<double>(v.data(), v.data() + v.size()));
  };
  ConvergenceTable table;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t used = 0;
  for (std::size_t n : steps) {
    const Tensor end = euler_integrate(field, x0, n).final_state();
    double err = 0.0;
    for (std::size_t i = 0; i < end.size(); ++i) err = std::max(err, std::abs(end[i] - exact[i]));
    table.rows.push_back({n, err});
    if (err > 0.0) {
      const double lx = std::log(static_cast<double>(n)), ly = std::log(err);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
      ++used;
    }
  }
  if (used >= 2) {
    const double m = static_cast<double>(used);
    table.order = -(m * sxy - sx * sy) / (m * sxx - sx * sx);
  }
  return table;
}

}  // namespace demo::sampler
