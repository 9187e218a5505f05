#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <vector>

#include "demo/core/optim.hpp"
#include "demo/field/field_net.hpp"
#include "demo/flow/coupling.hpp"

namespace demo::flow {

struct FlowSample {
  Tensor x0, x1, xt, u;
  double t = 0.0;
};

/// x_t = (1 - (1 - s) t) x0 + t x1 and u = x1 - (1 - s) x0 with s = sigma_min;
/// sigma_min = 0 gives the straight path. Throws DimensionError for t outside
/// [0, 1] or mismatched shapes.
FlowSample sample_path(const Tensor& x0, const Tensor& x1, double t, double sigma_min = 0.0);

/// Mean absolute error.
Var cfm_loss(Var pred, const Tensor& u);

struct VelocityLoss {
  Var loss;
  bool warned = false;  ///< set when frames < 2 and the term is zero by definition
};

/// Mean absolute error between forward frame differences of `pred` and `u`,
/// both (batch*frames) x d.
VelocityLoss velocity_consistency_loss(Var pred, const Tensor& u, std::size_t batch, std::size_t frames);

enum class Baseline { kFlow, kDdpm };

struct TrainConfig {
  double lambda_ot = 0.6;
  double lambda_vel = 1.0;
  double lr = 1e-4;
  std::size_t batch = 16;
  std::size_t steps = 2000;
  std::uint64_t seed = 1;
  Baseline baseline = Baseline::kFlow;
  CouplingMethod coupling = CouplingMethod::kExact;
  double sigma_min = 0.0;
};

/// One training batch of `batch` windows. x0 is the noise draw; for paired
/// sources (x1 built from x0) the coupling step is skipped.
struct FlowBatch {
  Tensor x0;       ///< (batch*F) x d
  Tensor x1;       ///< (batch*F) x d
  Tensor cond;     ///< (batch*F) x cond_dim or empty
  Tensor context;  ///< batch x (K*d) or empty
  bool paired = false;

  std::size_t batch(std::size_t frames) const { return x1.rows() / frames; }
};

class BatchSource {
 public:
  virtual ~BatchSource() = default;
  virtual FlowBatch sample(SeededRng& rng, std::size_t batch) const = 0;
};

/// x0 ~ N(0, I), x1 = x0 + b for a fixed shift b (paired, identity coupling).
class ConstantShiftSource : public BatchSource {
 public:
  ConstantShiftSource(std::size_t frames, Tensor shift);
  FlowBatch sample(SeededRng& rng, std::size_t batch) const override;
  const Tensor& shift() const { return shift_; }

 private:
  std::size_t frames_;
  Tensor shift_;  ///< 1 x d
};

struct StepRecord {
  std::size_t step = 0;
  double l_cfm = 0.0;  ///< flow: L1 field regression; ddpm: noise MSE
  double l_vel = 0.0;
  double total = 0.0;
  double coupling_cost = 0.0;
};

/// Columns: step,l_cfm,l_vel,total,coupling_cost
void write_loss_csv(std::ostream& os, const std::vector<StepRecord>& history);

/// Fixed-variance forward process with a linear beta schedule.
struct DdpmSchedule {
  std::vector<double> beta, alpha, alpha_bar;  ///< index k-1 for step k = 1..K

  static DdpmSchedule linear(std::size_t steps = 1000, double beta_start = 1e-4, double beta_end = 0.02);
  std::size_t steps() const { return beta.size(); }
  /// Step k mapped into the flow-time slot.
  double time_of(std::size_t k) const { return static_cast<double>(k) / static_cast<double>(steps()); }
};

/// Owns the optimizer state for one field net.
class FlowTrainer {
 public:
  FlowTrainer(field::FieldNet& net, const TrainConfig& config);

  const TrainConfig& config() const { return config_; }
  std::size_t steps_taken() const { return step_; }
  const std::vector<StepRecord>& history() const { return history_; }

  /// One Adam update from `batch`; `rng` supplies flow times and noise
  /// levels. Throws DivergenceError on a non-finite loss.
  StepRecord train_step(const FlowBatch& batch, SeededRng& rng);

  /// Runs config.steps updates drawing batches from `source`; RNG streams
  /// are forked from config.seed.
  void run(const BatchSource& source);

 private:
  StepRecord flow_step(const FlowBatch& batch, SeededRng& rng);
  StepRecord ddpm_step(const FlowBatch& batch, SeededRng& rng);

  field::FieldNet& net_;
  TrainConfig config_;
  Adam adam_;
  DdpmSchedule schedule_;
  std::size_t step_ = 0;
  std::vector<StepRecord> history_;
};

/// Field input for a batch with the given per-window times and current state.
field::FieldInput make_input(const FlowBatch& batch, const Tensor& x, std::vector<double> times);

/// Ancestral DDPM reverse process from x_K = `x`. `noise(w)` supplies the
/// next standard normal for window w. `cond`/`context` follow FieldInput layout.
Tensor ddpm_denoise(const field::FieldNet& net, const DdpmSchedule& schedule, Tensor x, const Tensor& cond,
                    const Tensor& context, const std::function<double(std::size_t)>& noise);

/// Ancestral DDPM sampling of `windows` windows, starting from N(0, I).
/// `cond`/`context` follow FieldInput layout.
Tensor ddpm_sample(const field::FieldNet& net, const DdpmSchedule& schedule, std::size_t windows, const Tensor& cond,
                   const Tensor& context, SeededRng& rng);

}  // namespace demo::flow
