#include "demo/disentangle/losses.hpp"

#include <cmath>
#include <numeric>

#include "demo/core/error.hpp"
#include "demo/core/numeric.hpp"
#include "demo/core/ops.hpp"

namespace demo::disentangle {

namespace {

// -log(exp(a) / sum exp(all)) with `a` = all[0], stabilized.
double neg_log_softmax_first(std::span<const double> logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double s = 0.0;
  for (double v : logits) s += std::exp(v - mx);
  return mx + std::log(s) - logits[0];
}

void check_temperature(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw Error("temperature must be positive and finite");
}

}  // namespace

double motion_recon_loss(const Tensor& generated, const Tensor& truth, const motion::SurrogateExtractors& ex) {
  require_same_shape(generated, truth, "motion_recon_loss");
  using W = motion::SurrogateExtractors::Which;
  double total = 0.0;
  for (auto w : {W::kPhi, W::kPsi}) {
    const Tensor a = ex.extract(generated, w), b = ex.extract(truth, w);
    for (std::size_t i = 0; i < a.size(); ++i) total += (a[i] - b[i]) * (a[i] - b[i]);
  }
  return total;
}

std::pair<double, double> eye_contrastive_bounds(double temperature) {
  check_temperature(temperature);
  const double e = 2.0 / temperature;
  return {std::log1p(std::exp(-e)), std::log1p(std::exp(e))};
}

double eye_contrastive_loss(std::span<const double> f1, std::span<const double> f2, std::span<const double> fa,
                            double temperature) {
  check_temperature(temperature);
  if (f1.size() != fa.size() || f2.size() != fa.size()) throw DimensionError("eye_contrastive_loss: width mismatch");
  const double logits[2] = {demo::cosine_similarity(f1, fa) / temperature,
                            demo::cosine_similarity(f2, fa) / temperature};
  const double loss = neg_log_softmax_first(logits);
  const auto [lo, hi] = eye_contrastive_bounds(temperature);
  const double slack = 1e-12;
  if (!(loss >= lo - slack && loss <= hi + slack)) {
    throw Error("eye_contrastive_loss: value " + std::to_string(loss) + " outside cosine bounds");
  }
  return loss;
}

double pose_loss(const motion::PoseParams& pred, const motion::PoseParams& truth) {
  const auto a = pred.flat(), b = truth.flat();
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

double infonce(std::span<const double> query, std::span<const double> positive,
               const std::vector<std::span<const double>>& negatives, double temperature) {
  check_temperature(temperature);
  if (negatives.empty()) throw Error("infonce: at least one negative required");
  std::vector<double> logits;
  logits.reserve(negatives.size() + 1);
  logits.push_back(demo::cosine_similarity(query, positive) / temperature);
  for (const auto& n : negatives) {
    if (n.size() != query.size()) throw DimensionError("infonce: negative width mismatch");
    logits.push_back(demo::cosine_similarity(query, n) / temperature);
  }
  return neg_log_softmax_first(logits);
}

Var motion_recon_loss(Var generated, const Tensor& truth, const motion::SurrogateExtractors& ex) {
  if (generated.shape() != truth.shape()) throw DimensionError("motion_recon_loss: shape mismatch");
  Tape& t = generated.tape();
  using W = motion::SurrogateExtractors::Which;
  const Var diff = ops::sub(generated, t.constant(truth));
  Var total;
  for (auto w : {W::kPhi, W::kPsi}) {
    const Var f = ops::matmul(diff, t.constant(ex.map(w)));
    const Var sq = ops::sum(ops::mul(f, f));
    total = total.valid() ? ops::add(total, sq) : sq;
  }
  return ops::scale(total, 1.0 / static_cast<double>(generated.rows()));
}

Var eye_contrastive_loss(Var f1, Var f2, Var fa, double temperature) {
  check_temperature(temperature);
  if (f1.shape() != fa.shape() || f2.shape() != fa.shape()) {
    throw DimensionError("eye_contrastive_loss: shape mismatch");
  }
  const Var na = ops::normalize_rows(fa);
  const Var s1 = ops::row_dot(ops::normalize_rows(f1), na);
  const Var s2 = ops::row_dot(ops::normalize_rows(f2), na);
  const Var logits = ops::scale(ops::concat_cols({s1, s2}), 1.0 / temperature);
  const std::vector<std::size_t> targets(fa.rows(), 0);
  const Var loss = ops::cross_entropy_rows(logits, targets);
  const auto [lo, hi] = eye_contrastive_bounds(temperature);
  const double v = loss.value().item();
  if (!(v >= lo - 1e-12 && v <= hi + 1e-12)) {
    throw Error("eye_contrastive_loss: value " + std::to_string(v) + " outside cosine bounds");
  }
  return loss;
}

Var pose_loss(Var pred, const Tensor& truth) {
  if (pred.shape() != truth.shape() || pred.cols() != 6) throw DimensionError("pose_loss: expects n x 6 on both sides");
  // l1_loss averages over all entries; the per-row form sums the 6 parameters.
  return ops::scale(ops::l1_loss(pred, pred.tape().constant(truth)), 6.0);
}

Var infonce(Var queries, Var keys, double temperature) {
  check_temperature(temperature);
  if (queries.shape() != keys.shape()) throw DimensionError("infonce: shape mismatch");
  if (queries.rows() < 2) throw Error("infonce: in-batch negatives need at least 2 rows");
  const Var sim = ops::matmul_nt(ops::normalize_rows(queries), ops::normalize_rows(keys));
  std::vector<std::size_t> targets(queries.rows());
  std::iota(targets.begin(), targets.end(), std::size_t{0});
  return ops::cross_entropy_rows(ops::scale(sim, 1.0 / temperature), targets);
}

}  // namespace demo::disentangle
