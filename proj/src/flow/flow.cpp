#include "demo/flow/flow.hpp"

#include <cmath>
#include <iomanip>

#include "demo/core/error.hpp"

namespace demo::flow {

namespace {

// Rows [w*F, (w+1)*F) of `x` as a flattened 1 x (F*d) row, for every window.
Tensor flatten_windows(const Tensor& x, std::size_t frames) {
  return x.reshaped({x.rows() / frames, frames * x.cols()});
}

// Moves window perm[i] of `src` into slot i.
Tensor permute_windows(const Tensor& src, const std::vector<std::size_t>& perm, std::size_t frames) {
  Tensor out(src.shape());
  const std::size_t block = frames * src.cols();
  for (std::size_t i = 0; i < perm.size(); ++i) {
    std::copy_n(src.data().begin() + perm[i] * block, block, out.data().begin() + i * block);
  }
  return out;
}

void check_finite(const StepRecord& r) {
  if (!std::isfinite(r.total) || !std::isfinite(r.l_cfm) || !std::isfinite(r.l_vel)) {
    throw DivergenceError("flow training diverged at step " + std::to_string(r.step) +
                          " (l_cfm=" + std::to_string(r.l_cfm) + ", l_vel=" + std::to_string(r.l_vel) + ")");
  }
}

}  // namespace

FlowSample sample_path(const Tensor& x0, const Tensor& x1, double t, double sigma_min) {
  if (!(t >= 0.0 && t <= 1.0)) throw DimensionError("sample_path: t = " + std::to_string(t) + " outside [0,1]");
  require_same_shape(x0, x1, "sample_path");
  FlowSample s{x0, x1, Tensor(x0.shape()), Tensor(x0.shape()), t};
  const double keep = 1.0 - (1.0 - sigma_min) * t;
  for (std::size_t i = 0; i < x0.size(); ++i) {
    s.xt[i] = keep * x0[i] + t * x1[i];
    s.u[i] = x1[i] - (1.0 - sigma_min) * x0[i];
  }
  // Exact endpoints regardless of rounding in the blend.
  if (sigma_min == 0.0 && t == 0.0) s.xt = x0;
  if (t == 1.0) s.xt = x1;
  return s;
}

Var cfm_loss(Var pred, const Tensor& u) {
  if (pred.shape() != u.shape()) throw DimensionError("cfm_loss: shape mismatch");
  return ops::l1_loss(pred, pred.tape().constant(u));
}

VelocityLoss velocity_consistency_loss(Var pred, const Tensor& u, std::size_t batch, std::size_t frames) {
  if (pred.shape() != u.shape()) throw DimensionError("velocity_consistency_loss: shape mismatch");
  if (batch * frames != pred.rows()) throw DimensionError("velocity_consistency_loss: rows != batch * frames");
  Tape& t = pred.tape();
  if (frames < 2) return {ops::scale(ops::sum(pred), 0.0), true};
  return {ops::l1_loss(ops::frame_diff(pred, batch, frames), ops::frame_diff(t.constant(u), batch, frames)), false};
}

ConstantShiftSource::ConstantShiftSource(std::size_t frames, Tensor shift) : frames_(frames), shift_(std::move(shift)) {
  if (frames_ == 0) throw ConfigError("constant-shift source needs frames >= 1");
  shift_ = shift_.reshaped({1, shift_.size()});
}

FlowBatch ConstantShiftSource::sample(SeededRng& rng, std::size_t batch) const {
  FlowBatch b;
  const std::size_t d = shift_.cols();
  b.x0 = rng.normal_tensor({batch * frames_, d});
  b.x1 = b.x0;
  for (std::size_t r = 0; r < b.x1.rows(); ++r)
    for (std::size_t j = 0; j < d; ++j) b.x1(r, j) += shift_[j];
  b.paired = true;
  return b;
}

void write_loss_csv(std::ostream& os, const std::vector<StepRecord>& history) {
  os << "step,l_cfm,l_vel,total,coupling_cost\n" << std::setprecision(17);
  for (const auto& r : history) {
    os << r.step << ',' << r.l_cfm << ',' << r.l_vel << ',' << r.total << ',' << r.coupling_cost << '\n';
  }
}

DdpmSchedule DdpmSchedule::linear(std::size_t steps, double beta_start, double beta_end) {
  if (steps < 2) throw ConfigError("ddpm schedule needs at least 2 steps");
  DdpmSchedule s;
  double bar = 1.0;
  for (std::size_t k = 0; k < steps; ++k) {
    const double b = beta_start + (beta_end - beta_start) * static_cast<double>(k) / static_cast<double>(steps - 1);
    s.beta.push_back(b);
    s.alpha.push_back(1.0 - b);
    bar *= 1.0 - b;
    s.alpha_bar.push_back(bar);
  }
  return s;
}

field::FieldInput make_input(const FlowBatch& batch, const Tensor& x, std::vector<double> times) {
  field::FieldInput in;
  in.x = x;
  in.t = std::move(times);
  in.cond = batch.cond;
  in.context = batch.context;
  return in;
}

FlowTrainer::FlowTrainer(field::FieldNet& net, const TrainConfig& config)
    : net_(net),
      config_(config),
      adam_(net.params().all(), AdamConfig{.lr = config.lr}),
      schedule_(DdpmSchedule::linear()) {
  if (config.lambda_ot < 0 || config.lambda_vel < 0) throw ConfigError("loss weights must be non-negative");
  if (!(config.lr > 0)) throw ConfigError("learning rate must be positive");
  if (config.batch == 0) throw ConfigError("batch must be positive");
}

StepRecord FlowTrainer::train_step(const FlowBatch& batch, SeededRng& rng) {
  StepRecord rec;
  try {
    rec = config_.baseline == Baseline::kFlow ? flow_step(batch, rng) : ddpm_step(batch, rng);
  } catch (const NonFiniteError& e) {
    throw DivergenceError("flow training diverged at step " + std::to_string(step_) + ": " + e.what());
  }
  history_.push_back(rec);
  ++step_;
  return rec;
}

StepRecord FlowTrainer::flow_step(const FlowBatch& batch, SeededRng& rng) {
  const std::size_t F = net_.config().F;
  const std::size_t B = batch.batch(F);
  StepRecord rec;
  rec.step = step_;

  // Pair noise with data across whole windows, then reorder the noise so
  // window i of x0 is matched with window i of x1 (conditions stay with x1).
  Tensor x0 = batch.x0;
  if (!batch.paired) {
    const auto c = ot_couple(flatten_windows(batch.x0, F), flatten_windows(batch.x1, F), config_.coupling);
    std::vector<std::size_t> inverse(B);
    for (std::size_t i = 0; i < B; ++i) inverse[c.permutation[i]] = i;
    x0 = permute_windows(batch.x0, inverse, F);
    rec.coupling_cost = c.total_cost;
  }

  std::vector<double> times(B);
  Tensor xt(x0.shape()), u(x0.shape());
  const std::size_t block = F * x0.cols();
  for (std::size_t w = 0; w < B; ++w) {
    times[w] = rng.uniform();
    const Tensor a({F, x0.cols()}, std::vector<double>(x0.data().begin() + w * block,
                                                        x0.data().begin() + (w + 1) * block));
    const Tensor b({F, x0.cols()}, std::vector<double>(batch.x1.data().begin() + w * block,
                                                        batch.x1.data().begin() + (w + 1) * block));
    const auto s = sample_path(a, b, times[w], config_.sigma_min);
    std::copy(s.xt.data().begin(), s.xt.data().end(), xt.data().begin() + w * block);
    std::copy(s.u.data().begin(), s.u.data().end(), u.data().begin() + w * block);
  }

  net_.params().zero_grad();
  Tape tape;
  const Var pred = net_.forward(tape, make_input(batch, xt, times));
  const Var l_cfm = cfm_loss(pred, u);
  const auto vel = velocity_consistency_loss(pred, u, B, F);
  const Var total = ops::add(ops::scale(l_cfm, config_.lambda_ot), ops::scale(vel.loss, config_.lambda_vel));
  rec.l_cfm = l_cfm.value().item();
  rec.l_vel = vel.loss.value().item();
  rec.total = total.value().item();
  check_finite(rec);
  tape.backward(total);
  adam_.step();
  return rec;
}

StepRecord FlowTrainer::ddpm_step(const FlowBatch& batch, SeededRng& rng) {
  const std::size_t F = net_.config().F;
  const std::size_t B = batch.batch(F);
  const std::size_t K = schedule_.steps();
  StepRecord rec;
  rec.step = step_;

  std::vector<double> times(B);
  Tensor xk(batch.x1.shape());
  const Tensor eps = rng.normal_tensor(batch.x1.shape());
  const std::size_t block = F * batch.x1.cols();
  for (std::size_t w = 0; w < B; ++w) {
    const std::size_t k = 1 + rng.below(K);
    times[w] = schedule_.time_of(k);
    const double ab = schedule_.alpha_bar[k - 1];
    const double a = std::sqrt(ab), s = std::sqrt(1.0 - ab);
    for (std::size_t i = w * block; i < (w + 1) * block; ++i) xk[i] = a * batch.x1[i] + s * eps[i];
  }

  net_.params().zero_grad();
  Tape tape;
  const Var pred = net_.forward(tape, make_input(batch, xk, times));
  const Var loss = ops::mse_loss(pred, tape.constant(eps));
  rec.l_cfm = loss.value().item();
  rec.total = rec.l_cfm;
  check_finite(rec);
  tape.backward(loss);
  adam_.step();
  return rec;
}

void FlowTrainer::run(const BatchSource& source) {
  SeededRng root(config_.seed);
  SeededRng data = root.fork(11), noise = root.fork(12);
  for (std::size_t s = 0; s < config_.steps; ++s) train_step(source.sample(data, config_.batch), noise);
}

Tensor ddpm_denoise(const field::FieldNet& net, const DdpmSchedule& schedule, Tensor x, const Tensor& cond,
                    const Tensor& context, const std::function<double(std::size_t)>& noise) {
  const auto& c = net.config();
  const std::size_t windows = x.rows() / c.F, block = c.F * c.d;
  field::FieldInput in;
  in.cond = cond;
  in.context = context;
  for (std::size_t k = schedule.steps(); k >= 1; --k) {
    in.x = x;
    in.t.assign(windows, schedule.time_of(k));
    const Tensor eps = net.predict(in);
    const double a = schedule.alpha[k - 1], ab = schedule.alpha_bar[k - 1], b = schedule.beta[k - 1];
    const double coef = b / std::sqrt(1.0 - ab), inv = 1.0 / std::sqrt(a), sd = std::sqrt(b);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = inv * (x[i] - coef * eps[i]);
      if (k > 1) x[i] += sd * noise(i / block);
    }
  }
  return x;
}

Tensor ddpm_sample(const field::FieldNet& net, const DdpmSchedule& schedule, std::size_t windows, const Tensor& cond,
                   const Tensor& context, SeededRng& rng) {
  const auto& c = net.config();
  return ddpm_denoise(net, schedule, rng.normal_tensor({windows * c.F, c.d}), cond, context,
                      [&](std::size_t) { return rng.normal(); });
}

}  // namespace demo::flow
