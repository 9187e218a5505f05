#include "demo/core/ops.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "demo/core/error.hpp"
#include "demo/kernels/kernels.hpp"

namespace demo::ops {

namespace {

Tape& same_tape(const Var& a, const Var& b, const char* op) {
  Tape& t = a.tape();
  t.check_owner(b, op);
  return t;
}

void need_same_shape(const Var& a, const Var& b, const char* op) { require_same_shape(a.value(), b.value(), op); }

void accumulate(Tape& t, int id, const Tensor& g, double factor = 1.0) {
  if (!t.needs_grad(id)) return;
  auto& buf = t.grad_buffer(id);
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += factor * g[i];
}

/// Elementwise op; `back(x, upstream, grad_x)` accumulates the input gradient.
template <class F, class B>
Var unary(Var a, const char* op, F&& f, B back) {
  Tape& t = a.tape();
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const int ia = a.id();
  return t.record(std::move(y), {ia},
                  [ia, back = std::move(back)](Tape& tp, const Tensor& g) {
                    if (!tp.needs_grad(ia)) return;
                    back(tp.value(ia), g, tp.grad_buffer(ia));
                  },
                  op);
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul");
  const Tensor &A = a.value(), &B = b.value();
  if (A.cols() != B.rows() || B.ndim() != 2) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_str(A.shape()) + " x " +
                         shape_str(B.shape()));
  }
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Tensor C({m, n});
  kernels::gemm(false, false, m, n, k, A.data(), B.data(), C.data(), false);
  const int ia = a.id(), ib = b.id();
  return t.record(std::move(C), {ia, ib},
                  [ia, ib, m, n, k](Tape& tp, const Tensor& g) {
                    if (tp.needs_grad(ia))
                      kernels::gemm(false, true, m, k, n, g.data(), tp.value(ib).data(), tp.grad_buffer(ia).data(),
                                    true);
                    if (tp.needs_grad(ib))
                      kernels::gemm(true, false, k, n, m, tp.value(ia).data(), g.data(), tp.grad_buffer(ib).data(),
                                    true);
                  },
                  "matmul");
}

Var matmul_nt(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul_nt");
  const Tensor &A = a.value(), &B = b.value();
  if (A.cols() != B.cols()) {
    throw DimensionError("matmul_nt: inner dimensions disagree, " + shape_str(A.shape()) + " x " +
                         shape_str(B.shape()) + "^T");
  }
  const std::size_t m = A.rows(), k = A.cols(), n = B.rows();
  Tensor C({m, n});
  kernels::gemm(false, true, m, n, k, A.data(), B.data(), C.data(), false);
  const int ia = a.id(), ib = b.id();
  return t.record(std::move(C), {ia, ib},
                  [ia, ib, m, n, k](Tape& tp, const Tensor& g) {
                    if (tp.needs_grad(ia))
                      kernels::gemm(false, false, m, k, n, g.data(), tp.value(ib).data(), tp.grad_buffer(ia).data(),
                                    true);
                    if (tp.needs_grad(ib))
                      kernels::gemm(true, false, n, k, m, g.data(), tp.value(ia).data(), tp.grad_buffer(ib).data(),
                                    true);
                  },
                  "matmul_nt");
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b, "add");
  need_same_shape(a, b, "add");
  Tensor y = a.value();
  const Tensor& B = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += B[i];
  const int ia = a.id(), ib = b.id();
  return t.record(std::move(y), {ia, ib},
                  [ia, ib](Tape& tp, const Tensor& g) {
                    accumulate(tp, ia, g);
                    accumulate(tp, ib, g);
                  },
                  "add");
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b, "sub");
  need_same_shape(a, b, "sub");
  Tensor y = a.value();
  const Tensor& B = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= B[i];
  const int ia = a.id(), ib = b.id();
  return t.record(std::move(y), {ia, ib},
                  [ia, ib](Tape& tp, const Tensor& g) {
                    accumulate(tp, ia, g);
                    accumulate(tp, ib, g, -1.0);
                  },
                  "sub");
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b, "mul");
  need_same_shape(a, b, "mul");
  Tensor y = a.value();
  const Tensor& B = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= B[i];
  const int ia = a.id(), ib = b.id();
  return t.record(std::move(y), {ia, ib},
                  [ia, ib](Tape& tp, const Tensor& g) {
                    if (tp.needs_grad(ia)) {
                      auto& ga = tp.grad_buffer(ia);
                      const auto& vb = tp.value(ib);
                      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
                    }
                    if (tp.needs_grad(ib)) {
                      auto& gb = tp.grad_buffer(ib);
                      const auto& va = tp.value(ia);
                      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
                    }
                  },
                  "mul");
}

Var scale(Var a, double s) {
  return unary(
      a, "scale", [s](double x) { return s * x; },
      [s](const Tensor&, const Tensor& g, Tensor& ga) {
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
      });
}

Var add_row(Var a, Var row) {
  Tape& t = same_tape(a, row, "add_row");
  const Tensor &A = a.value(), &R = row.value();
  if (R.size() != A.cols()) {
    throw DimensionError("add_row: row " + shape_str(R.shape()) + " does not match " + shape_str(A.shape()));
  }
  Tensor y = A;
  const std::size_t n = A.cols();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += R[i % n];
  const int ia = a.id(), ir = row.id();
  return t.record(std::move(y), {ia, ir},
                  [ia, ir, n](Tape& tp, const Tensor& g) {
                    accumulate(tp, ia, g);
                    if (tp.needs_grad(ir)) {
                      auto& gr = tp.grad_buffer(ir);
                      for (std::size_t i = 0; i < g.size(); ++i) gr[i % n] += g[i];
                    }
                  },
                  "add_row");
}

Var mul_row(Var a, Var row) {
  Tape& t = same_tape(a, row, "mul_row");
  const Tensor &A = a.value(), &R = row.value();
  if (R.size() != A.cols()) {
    throw DimensionError("mul_row: row " + shape_str(R.shape()) + " does not match " + shape_str(A.shape()));
  }
  Tensor y = A;
  const std::size_t n = A.cols();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= R[i % n];
  const int ia = a.id(), ir = row.id();
  return t.record(std::move(y), {ia, ir},
                  [ia, ir, n](Tape& tp, const Tensor& g) {
                    const auto& va = tp.value(ia);
                    const auto& vr = tp.value(ir);
                    if (tp.needs_grad(ia)) {
                      auto& ga = tp.grad_buffer(ia);
                      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vr[i % n];
                    }
                    if (tp.needs_grad(ir)) {
                      auto& gr = tp.grad_buffer(ir);
                      for (std::size_t i = 0; i < g.size(); ++i) gr[i % n] += g[i] * va[i];
                    }
                  },
                  "mul_row");
}

Var repeat_rows(Var a, std::size_t times) {
  Tape& t = a.tape();
  const Tensor& A = a.value();
  const std::size_t r = A.rows(), n = A.cols();
  Tensor y({r * times, n});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < times; ++j)
      for (std::size_t c = 0; c < n; ++c) y((i * times + j), c) = A[i * n + c];
  const int ia = a.id();
  return t.record(std::move(y), {ia},
                  [ia, r, n, times](Tape& tp, const Tensor& g) {
                    if (!tp.needs_grad(ia)) return;
                    auto& ga = tp.grad_buffer(ia);
                    for (std::size_t i = 0; i < r; ++i)
                      for (std::size_t j = 0; j < times; ++j)
                        for (std::size_t c = 0; c < n; ++c) ga[i * n + c] += g[(i * times + j) * n + c];
                  },
                  "repeat_rows");
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  Tape& t = parts.front().tape();
  const std::size_t rows = parts.front().rows();
  std::size_t total = 0;
  std::vector<int> ids;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    t.check_owner(p, "concat_cols");
    if (p.rows() != rows) throw DimensionError("concat_cols: row counts differ");
    ids.push_back(p.id());
    widths.push_back(p.cols());
    total += p.cols();
  }
  Tensor y({rows, total});
  std::size_t off = 0;
  for (const auto& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < v.cols(); ++c) y(r, off + c) = v(r, c);
    off += v.cols();
  }
  return t.record(std::move(y), ids,
                  [ids, widths, rows, total](Tape& tp, const Tensor& g) {
                    std::size_t off = 0;
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                      if (tp.needs_grad(ids[k])) {
                        auto& gk = tp.grad_buffer(ids[k]);
                        for (std::size_t r = 0; r < rows; ++r)
                          for (std::size_t c = 0; c < widths[k]; ++c) gk[r * widths[k] + c] += g[r * total + off + c];
                      }
                      off += widths[k];
                    }
                  },
                  "concat_cols");
}

Var slice_cols(Var a, std::size_t start, std::size_t count) {
  Tape& t = a.tape();
  const Tensor& A = a.value();
  if (count == 0 || start + count > A.cols()) throw DimensionError("slice_cols: range out of bounds");
  const std::size_t rows = A.rows(), n = A.cols();
  Tensor y({rows, count});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < count; ++c) y(r, c) = A(r, start + c);
  const int ia = a.id();
  return t.record(std::move(y), {ia},
                  [ia, rows, n, start, count](Tape& tp, const Tensor& g) {
                    if (!tp.needs_grad(ia)) return;
                    auto& ga = tp.grad_buffer(ia);
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t c = 0; c < count; ++c) ga[r * n + start + c] += g[r * count + c];
                  },
                  "slice_cols");
}

Var tanh(Var a) {
  return unary(
      a, "tanh", [](double x) { return std::tanh(x); },
      [](const Tensor& x, const Tensor& g, Tensor& ga) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double th = std::tanh(x[i]);
          ga[i] += g[i] * (1.0 - th * th);
        }
      });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Var gelu(Var a) {
  return unary(
      a, "gelu",
      [](double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x))); },
      [](const Tensor& x, const Tensor& g, Tensor& ga) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double v = x[i];
          const double u = kGeluC * (v + kGeluA * v * v * v);
          const double th = std::tanh(u);
          const double du = kGeluC * (1.0 + 3.0 * kGeluA * v * v);
          ga[i] += g[i] * (0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * du);
        }
      });
}

Var exp(Var a) {
  return unary(
      a, "exp", [](double x) { return std::exp(x); },
      [](const Tensor& x, const Tensor& g, Tensor& ga) {
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * std::exp(x[i]);
      });
}

Var layer_norm(Var a, double eps) {
  Tape& t = a.tape();
  const Tensor& x = a.value();
  const std::size_t rows = x.rows(), n = x.cols();
  Tensor y(x.shape());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto xr = x.row(r);
    double mu = 0.0;
    for (double v : xr) mu += v;
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (double v : xr) var += (v - mu) * (v - mu);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    auto yr = y.row(r);
    for (std::size_t c = 0; c < n; ++c) yr[c] = (xr[c] - mu) * inv_std[r];
  }
  const int ia = a.id();
  Tensor y_saved = y;
  return t.record(std::move(y), {ia},
                  [ia, rows, n, inv_std = std::move(inv_std), y = std::move(y_saved)](Tape& tp, const Tensor& g) {
                    if (!tp.needs_grad(ia)) return;
                    auto& ga = tp.grad_buffer(ia);
                    const double inv_n = 1.0 / static_cast<double>(n);
                    for (std::size_t r = 0; r < rows; ++r) {
                      double mg = 0.0, mgy = 0.0;
                      for (std::size_t c = 0; c < n; ++c) {
                        mg += g[r * n + c];
                        mgy += g[r * n + c] * y[r * n + c];
                      }
                      mg *= inv_n;
                      mgy *= inv_n;
                      for (std::size_t c = 0; c < n; ++c)
                        ga[r * n + c] += inv_std[r] * (g[r * n + c] - mg - y[r * n + c] * mgy);
                    }
                  },
                  "layer_norm");
}

Var softmax(Var a, std::span<const unsigned char> allow) {
  Tape& t = a.tape();
  const Tensor& x = a.value();
  if (!allow.empty() && allow.size() != x.size()) throw DimensionError("softmax: mask shape does not match input");
  const std::size_t rows = x.rows(), n = x.cols();
  Tensor y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    kernels::softmax_row(x.row(r), allow.empty() ? allow : allow.subspan(r * n, n), y.row(r));
  }
  const int ia = a.id();
  Tensor y_saved = y;
  return t.record(std::move(y), {ia},
                  [ia, rows, n, y = std::move(y_saved)](Tape& tp, const Tensor& g) {
                    if (!tp.needs_grad(ia)) return;
                    auto& ga = tp.grad_buffer(ia);
                    for (std::size_t r = 0; r < rows; ++r) {
                      double dot = 0.0;
                      for (std::size_t c = 0; c < n; ++c) dot += y[r * n + c] * g[r * n + c];
                      for (std::size_t c = 0; c < n; ++c) ga[r * n + c] += y[r * n + c] * (g[r * n + c] - dot);
                    }
                  },
                  "softmax");
}

Var attention(Var q, Var k, Var v, std::span<const unsigned char> allow, std::size_t batch, std::size_t frames,
              std::size_t heads) {
  Tape& t = q.tape();
  t.check_owner(k, "attention");
  t.check_owner(v, "attention");
  need_same_shape(q, k, "attention");
  need_same_shape(q, v, "attention");
  const std::size_t width = q.cols();
  if (q.rows() != batch * frames) throw DimensionError("attention: rows do not equal batch * frames");
  if (allow.size() != frames * frames) throw DimensionError("attention: mask must be frames x frames");
  for (std::size_t f = 0; f < frames; ++f) {
    bool any = false;
    for (std::size_t g = 0; g < frames; ++g) any = any || allow[f * frames + g];
    if (!any) throw DegenerateMaskError("attention: frame " + std::to_string(f) + " attends to nothing");
  }
  const kernels::AttentionShape shape{batch, frames, heads, width};
  std::vector<double> probs(batch * heads * frames * frames);
  Tensor out(q.shape());
  kernels::attention_forward(shape, q.value().data(), k.value().data(), v.value().data(), allow, probs, out.data());
  const int iq = q.id(), ik = k.id(), iv = v.id();
  return t.record(std::move(out), {iq, ik, iv},
                  [iq, ik, iv, shape, probs = std::move(probs)](Tape& tp, const Tensor& g) {
                    const Shape& sh = tp.value(iq).shape();
                    Tensor dq(sh), dk(sh), dv(sh);
                    kernels::attention_backward(shape, tp.value(iq).data(), tp.value(ik).data(), tp.value(iv).data(),
                                                probs, g.data(), dq.data(), dk.data(), dv.data());
                    accumulate(tp, iq, dq);
                    accumulate(tp, ik, dk);
                    accumulate(tp, iv, dv);
                  },
                  "attention");
}

Var normalize_rows(Var a) {
  Tape& t = a.tape();
  const Tensor& x = a.value();
  const std::size_t rows = x.rows(), n = x.cols();
  Tensor y(x.shape());
  std::vector<double> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (double v : x.row(r)) s += v * v;
    norms[r] = std::sqrt(s);
    if (norms[r] == 0.0) throw ZeroVectorError("normalize_rows: zero-norm row " + std::to_string(r));
    for (std::size_t c = 0; c < n; ++c) y(r, c) = x(r, c) / norms[r];
  }
  const int ia = a.id();
  Tensor y_saved = y;
  return t.record(std::move(y), {ia},
                  [ia, rows, n, norms = std::move(norms), y = std::move(y_saved)](Tape& tp, const Tensor& g) {
                    if (!tp.needs_grad(ia)) return;
                    auto& ga = tp.grad_buffer(ia);
                    for (std::size_t r = 0; r < rows; ++r) {
                      double dot = 0.0;
                      for (std::size_t c = 0; c < n; ++c) dot += y[r * n + c] * g[r * n + c];
                      for (std::size_t c = 0; c < n; ++c)
                        ga[r * n + c] += (g[r * n + c] - y[r * n + c] * dot) / norms[r];
                    }
                  },
                  "normalize_rows");
}

Var row_dot(Var a, Var b) {
  Tape& t = same_tape(a, b, "row_dot");
  need_same_shape(a, b, "row_dot");
  const Tensor &A = a.value(), &B = b.value();
  const std::size_t rows = A.rows(), n = A.cols();
  Tensor y({rows, 1});
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) s += A(r, c) * B(r, c);
    y[r] = s;
  }
  const int ia = a.id(), ib = b.id();
  return t.record(std::move(y), {ia, ib},
                  [ia, ib, rows, n](Tape& tp, const Tensor& g) {
                    const auto &va = tp.value(ia), &vb = tp.value(ib);
                    if (tp.needs_grad(ia)) {
                      auto& ga = tp.grad_buffer(ia);
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t c = 0; c < n; ++c) ga[r * n + c] += g[r] * vb[r * n + c];
                    }
                    if (tp.needs_grad(ib)) {
                      auto& gb = tp.grad_buffer(ib);
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t c = 0; c < n; ++c) gb[r * n + c] += g[r] * va[r * n + c];
                    }
                  },
                  "row_dot");
}

Var cross_entropy_rows(Var logits, std::span<const std::size_t> targets) {
  Tape& t = logits.tape();
  const Tensor& x = logits.value();
  const std::size_t rows = x.rows(), n = x.cols();
  if (targets.size() != rows) throw DimensionError("cross_entropy_rows: one target per row required");
  Tensor probs(x.shape());
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] >= n) throw DimensionError("cross_entropy_rows: target index out of range");
    kernels::softmax_row(x.row(r), {}, probs.row(r));
    double mx = x(r, 0);
    for (double v : x.row(r)) mx = std::max(mx, v);
    double s = 0.0;
    for (double v : x.row(r)) s += std::exp(v - mx);
    loss += mx + std::log(s) - x(r, targets[r]);
  }
  loss /= static_cast<double>(rows);
  const int ia = logits.id();
  std::vector<std::size_t> tg(targets.begin(), targets.end());
  return t.record(Tensor::scalar(loss), {ia},
                  [ia, rows, n, probs = std::move(probs), tg = std::move(tg)](Tape& tp, const Tensor& g) {
                    if (!tp.needs_grad(ia)) return;
                    auto& ga = tp.grad_buffer(ia);
                    const double w = g[0] / static_cast<double>(rows);
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t c = 0; c < n; ++c)
                        ga[r * n + c] += w * (probs[r * n + c] - (c == tg[r] ? 1.0 : 0.0));
                  },
                  "cross_entropy_rows");
}

Var frame_diff(Var a, std::size_t batch, std::size_t frames) {
  Tape& t = a.tape();
  const Tensor& x = a.value();
  if (x.rows() != batch * frames || frames < 2) throw DimensionError("frame_diff: need batch * frames rows, frames >= 2");
  const std::size_t n = x.cols();
  Tensor y({batch * (frames - 1), n});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t f = 0; f + 1 < frames; ++f)
      for (std::size_t c = 0; c < n; ++c) y(b * (frames - 1) + f, c) = x(b * frames + f + 1, c) - x(b * frames + f, c);
  const int ia = a.id();
  return t.record(std::move(y), {ia},
                  [ia, batch, frames, n](Tape& tp, const Tensor& g) {
                    if (!tp.needs_grad(ia)) return;
                    auto& ga = tp.grad_buffer(ia);
                    for (std::size_t b = 0; b < batch; ++b)
                      for (std::size_t f = 0; f + 1 < frames; ++f)
                        for (std::size_t c = 0; c < n; ++c) {
                          const double gv = g[(b * (frames - 1) + f) * n + c];
                          ga[(b * frames + f + 1) * n + c] += gv;
                          ga[(b * frames + f) * n + c] -= gv;
                        }
                  },
                  "frame_diff");
}

Var sum(Var a) {
  Tape& t = a.tape();
  const int ia = a.id();
  return t.record(Tensor::scalar(demo::sum(a.value())), {ia},
                  [ia](Tape& tp, const Tensor& g) {
                    if (!tp.needs_grad(ia)) return;
                    auto& ga = tp.grad_buffer(ia);
                    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
                  },
                  "sum");
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var l1_loss(Var pred, Var target) {
  Tape& t = same_tape(pred, target, "l1_loss");
  need_same_shape(pred, target, "l1_loss");
  const Tensor &P = pred.value(), &T = target.value();
  const double inv = 1.0 / static_cast<double>(P.size());
  double s = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i) s += std::abs(P[i] - T[i]);
  const int ip = pred.id(), it = target.id();
  return t.record(Tensor::scalar(s * inv), {ip, it},
                  [ip, it, inv](Tape& tp, const Tensor& g) {
                    const auto &vp = tp.value(ip), &vt = tp.value(it);
                    const bool gp = tp.needs_grad(ip), gt = tp.needs_grad(it);
                    Tensor* bp = gp ? &tp.grad_buffer(ip) : nullptr;
                    Tensor* bt = gt ? &tp.grad_buffer(it) : nullptr;
                    for (std::size_t i = 0; i < vp.size(); ++i) {
                      const double d = vp[i] - vt[i];
                      const double sg = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
                      if (bp) (*bp)[i] += g[0] * inv * sg;
                      if (bt) (*bt)[i] -= g[0] * inv * sg;
                    }
                  },
                  "l1_loss");
}

Var mse_loss(Var pred, Var target) {
  Tape& t = same_tape(pred, target, "mse_loss");
  need_same_shape(pred, target, "mse_loss");
  const Tensor &P = pred.value(), &T = target.value();
  const double inv = 1.0 / static_cast<double>(P.size());
  double s = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i) s += (P[i] - T[i]) * (P[i] - T[i]);
  const int ip = pred.id(), it = target.id();
  return t.record(Tensor::scalar(s * inv), {ip, it},
                  [ip, it, inv](Tape& tp, const Tensor& g) {
                    const auto &vp = tp.value(ip), &vt = tp.value(it);
                    const bool gp = tp.needs_grad(ip), gt = tp.needs_grad(it);
                    Tensor* bp = gp ? &tp.grad_buffer(ip) : nullptr;
                    Tensor* bt = gt ? &tp.grad_buffer(it) : nullptr;
                    for (std::size_t i = 0; i < vp.size(); ++i) {
                      const double d = 2.0 * g[0] * inv * (vp[i] - vt[i]);
                      if (bp) (*bp)[i] += d;
                      if (bt) (*bt)[i] -= d;
                    }
                  },
                  "mse_loss");
}

}  // namespace demo::ops
