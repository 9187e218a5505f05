#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>

#include "demo/core/error.hpp"
#include "kernels_detail.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace demo::kernels {

namespace {
#if defined(_OPENMP)
std::atomic<bool> g_parallel{true};
#else
std::atomic<bool> g_parallel{false};
#endif
}  // namespace

void set_parallel(bool enabled) noexcept { g_parallel = enabled && openmp_available(); }
bool parallel_enabled() noexcept { return g_parallel; }

bool openmp_available() noexcept {
#if defined(_OPENMP)
  return true;
#else
  return false;
#endif
}

int max_threads() noexcept {
#if defined(_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void softmax_row(std::span<const double> x, std::span<const unsigned char> allow, std::span<double> out) {
  const std::size_t n = x.size();
  const bool masked = !allow.empty();
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j)
    if (!masked || allow[j]) mx = std::max(mx, x[j]);
  if (mx == -std::numeric_limits<double>::infinity()) throw DegenerateMaskError("softmax: fully masked row");
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (masked && !allow[j]) {
      out[j] = 0.0;
      continue;
    }
    out[j] = std::exp(x[j] - mx);
    total += out[j];
  }
  const double inv = 1.0 / total;
  for (std::size_t j = 0; j < n; ++j) out[j] *= inv;
}

namespace detail {

void check_gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                std::span<const double> a, std::span<const double> b, std::span<double> c) {
  (void)trans_a;
  (void)trans_b;
  if (a.size() != m * k || b.size() != k * n || c.size() != m * n) {
    throw DimensionError("gemm: operand sizes " + std::to_string(a.size()) + "," + std::to_string(b.size()) +
                         "," + std::to_string(c.size()) + " do not match m=" + std::to_string(m) +
                         " n=" + std::to_string(n) + " k=" + std::to_string(k));
  }
}

void check_attention(const AttentionShape& s, std::size_t q, std::size_t k, std::size_t v, std::size_t allow,
                     std::size_t probs, std::size_t out) {
  const std::size_t rows = s.batch * s.frames * s.width;
  if (s.heads == 0 || s.width % s.heads != 0) throw DimensionError("attention: width not divisible by heads");
  if (q != rows || k != rows || v != rows || out != rows || allow != s.frames * s.frames ||
      probs != s.batch * s.heads * s.frames * s.frames) {
    throw DimensionError("attention: buffer sizes do not match geometry");
  }
}

void attention_block_forward(const AttentionShape& s, std::size_t b, std::size_t h, const double* q,
                             const double* k, const double* v, const unsigned char* allow, double* probs,
                             double* out) {
  const std::size_t F = s.frames, W = s.width, dh = s.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::size_t base = b * F * W + h * dh;
  double* P = probs + (b * s.heads + h) * F * F;
  std::vector<double> scores(F);
  for (std::size_t f = 0; f < F; ++f) {
    const double* qf = q + base + f * W;
    for (std::size_t g = 0; g < F; ++g) {
      if (!allow[f * F + g]) {
        scores[g] = 0.0;
        continue;
      }
      const double* kg = k + base + g * W;
      double dot = 0.0;
      for (std::size_t c = 0; c < dh; ++c) dot += qf[c] * kg[c];
      scores[g] = dot * scale;
    }
    softmax_row(scores, std::span<const unsigned char>(allow + f * F, F), std::span<double>(P + f * F, F));
    double* of = out + base + f * W;
    for (std::size_t c = 0; c < dh; ++c) of[c] = 0.0;
    for (std::size_t g = 0; g < F; ++g) {
      const double p = P[f * F + g];
      if (p == 0.0) continue;
      const double* vg = v + base + g * W;
      for (std::size_t c = 0; c < dh; ++c) of[c] += p * vg[c];
    }
  }
}

void attention_block_backward(const AttentionShape& s, std::size_t b, std::size_t h, const double* q,
                              const double* k, const double* v, const double* probs, const double* dout,
                              double* dq, double* dk, double* dv) {
  const std::size_t F = s.frames, W = s.width, dh = s.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::size_t base = b * F * W + h * dh;
  const double* P = probs + (b * s.heads + h) * F * F;
  std::vector<double> dP(F), dS(F * F);
  for (std::size_t f = 0; f < F; ++f) {
    const double* dof = dout + base + f * W;
    double weighted = 0.0;
    for (std::size_t g = 0; g < F; ++g) {
      const double p = P[f * F + g];
      if (p == 0.0) {
        dP[g] = 0.0;
        continue;
      }
      const double* vg = v + base + g * W;
      double dot = 0.0;
      for (std::size_t c = 0; c < dh; ++c) dot += dof[c] * vg[c];
      dP[g] = dot;
      weighted += p * dot;
    }
    for (std::size_t g = 0; g < F; ++g) dS[f * F + g] = P[f * F + g] * (dP[g] - weighted) * scale;
  }
  // dV_g = sum_f P[f,g] dO_f ; dK_g = sum_f dS[f,g] q_f ; dQ_f = sum_g dS[f,g] k_g
  for (std::size_t g = 0; g < F; ++g) {
    double* dvg = dv + base + g * W;
    double* dkg = dk + base + g * W;
    for (std::size_t f = 0; f < F; ++f) {
      const double p = P[f * F + g];
      const double ds = dS[f * F + g];
      const double* dof = dout + base + f * W;
      const double* qf = q + base + f * W;
      for (std::size_t c = 0; c < dh; ++c) {
        dvg[c] += p * dof[c];
        dkg[c] += ds * qf[c];
      }
    }
  }
  for (std::size_t f = 0; f < F; ++f) {
    double* dqf = dq + base + f * W;
    for (std::size_t g = 0; g < F; ++g) {
      const double ds = dS[f * F + g];
      if (ds == 0.0) continue;
      const double* kg = k + base + g * W;
      for (std::size_t c = 0; c < dh; ++c) dqf[c] += ds * kg[c];
    }
  }
}

}  // namespace detail

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
          std::span<const double> b, std::span<double> c, bool accumulate) {
  if (parallel_enabled())
    omp::gemm(trans_a, trans_b, m, n, k, a, b, c, accumulate);
  else
    serial::gemm(trans_a, trans_b, m, n, k, a, b, c, accumulate);
}

void attention_forward(const AttentionShape& s, std::span<const double> q, std::span<const double> k,
                       std::span<const double> v, std::span<const unsigned char> allow, std::span<double> probs,
                       std::span<double> out) {
  if (parallel_enabled())
    omp::attention_forward(s, q, k, v, allow, probs, out);
  else
    serial::attention_forward(s, q, k, v, allow, probs, out);
}

void attention_backward(const AttentionShape& s, std::span<const double> q, std::span<const double> k,
                        std::span<const double> v, std::span<const double> probs, std::span<const double> dout,
                        std::span<double> dq, std::span<double> dk, std::span<double> dv) {
  if (parallel_enabled())
    omp::attention_backward(s, q, k, v, probs, dout, dq, dk, dv);
  else
    serial::attention_backward(s, q, k, v, probs, dout, dq, dk, dv);
}

}  // namespace demo::kernels
