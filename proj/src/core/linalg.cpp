#include "demo/core/linalg.hpp"

#include "demo/core/error.hpp"

namespace demo {

Eigen::MatrixXd to_eigen(const Tensor& t) {
  Eigen::MatrixXd m(t.rows(), t.cols());
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = t(r, c);
  return m;
}

Tensor from_eigen(const Eigen::MatrixXd& m) {
  Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) t(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = m(r, c);
  return t;
}

LinearProbe LinearProbe::fit(const Tensor& x, const Tensor& y, double ridge) {
  if (x.rows() != y.rows()) throw DimensionError("LinearProbe::fit: row counts differ");
  const auto n = static_cast<Eigen::Index>(x.rows());
  const auto p = static_cast<Eigen::Index>(x.cols());
  Eigen::MatrixXd design(n, p + 1);
  design.leftCols(p) = to_eigen(x);
  design.col(p).setOnes();
  const Eigen::MatrixXd target = to_eigen(y);
  Eigen::MatrixXd solution;
  if (ridge > 0.0) {
    Eigen::MatrixXd gram = design.transpose() * design;
    gram.topLeftCorner(p, p).diagonal().array() += ridge * static_cast<double>(n);
    solution = gram.ldlt().solve(design.transpose() * target);
  } else {
    solution = design.colPivHouseholderQr().solve(target);
  }
  LinearProbe probe;
  probe.coef = from_eigen(solution.topRows(p));
  probe.intercept = from_eigen(solution.bottomRows(1));
  return probe;
}

Tensor LinearProbe::predict(const Tensor& x) const {
  if (!fitted()) throw Error("LinearProbe::predict: probe not fitted");
  if (x.cols() != coef.rows()) throw DimensionError("LinearProbe::predict: feature width mismatch");
  Eigen::MatrixXd out = to_eigen(x) * to_eigen(coef);
  out.rowwise() += to_eigen(intercept).row(0);
  return from_eigen(out);
}

double r_squared(const Tensor& predicted, const Tensor& actual) {
  require_same_shape(predicted, actual, "r_squared");
  const std::size_t n = actual.rows(), k = actual.cols();
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    double mu = 0.0;
    for (std::size_t r = 0; r < n; ++r) mu += actual(r, c);
    mu /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
      ss_res += (actual(r, c) - predicted(r, c)) * (actual(r, c) - predicted(r, c));
      ss_tot += (actual(r, c) - mu) * (actual(r, c) - mu);
    }
  }
  if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
  return 1.0 - ss_res / ss_tot;
}

double probe_r_squared(const Tensor& features, const Tensor& targets, double ridge) {
  const auto probe = LinearProbe::fit(features, targets, ridge);
  return r_squared(probe.predict(features), targets);
}

}  // namespace demo
