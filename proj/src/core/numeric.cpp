#include "demo/core/numeric.hpp"

#include <algorithm>
#include <cmath>

#include "demo/core/error.hpp"
#include "demo/kernels/kernels.hpp"

namespace demo {

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows() || b.ndim() != 2) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  Tensor c({a.rows(), b.cols()});
  kernels::gemm(false, false, a.rows(), b.cols(), a.cols(), a.data(), b.data(), c.data(), false);
  return c;
}

Tensor transpose(const Tensor& a) {
  Tensor t({a.cols(), a.rows()});
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) t(c, r) = a(r, c);
  return t;
}

Tensor softmax(const Tensor& x, std::span<const unsigned char> allow) {
  if (!allow.empty() && allow.size() != x.size()) throw DimensionError("softmax: mask shape does not match input");
  Tensor y(x.shape());
  const std::size_t n = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r)
    kernels::softmax_row(x.row(r), allow.empty() ? allow : allow.subspan(r * n, n), y.row(r));
  return y;
}

Tensor layer_norm(const Tensor& x, double eps) {
  Tensor y(x.shape());
  const double n = static_cast<double>(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto xr = x.row(r);
    double mu = 0.0;
    for (double v : xr) mu += v;
    mu /= n;
    double var = 0.0;
    for (double v : xr) var += (v - mu) * (v - mu);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + eps);
    auto yr = y.row(r);
    for (std::size_t c = 0; c < xr.size(); ++c) yr[c] = (xr[c] - mu) * inv;
  }
  return y;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw ZeroVectorError("cosine_similarity: zero-norm input");
  const double s = dot(a, b) / (na * nb);
  return std::clamp(s, -1.0, 1.0);
}

double l1_loss(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "l1_loss");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - target[i]);
  return s / static_cast<double>(pred.size());
}

}  // namespace demo
