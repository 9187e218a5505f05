#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "demo/kernels/kernels.hpp"

// Per-row bodies shared by the serial and OpenMP kernels.

namespace demo::kernels::detail {

inline void transpose(std::size_t rows, std::size_t cols, const double* src, double* dst) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

/// c_row[0..n) (+)= a_row[0..k) * B[k x n]
inline void gemm_row(std::size_t n, std::size_t k, const double* a_row, const double* b, double* c_row,
                     bool accumulate) {
  if (!accumulate)
    for (std::size_t j = 0; j < n; ++j) c_row[j] = 0.0;
  for (std::size_t p = 0; p < k; ++p) {
    const double av = a_row[p];
    const double* b_row = b + p * n;
    for (std::size_t j = 0; j < n; ++j) c_row[j] += av * b_row[j];
  }
}

/// Resolves transposes into contiguous row-major operands.
struct GemmOperands {
  const double* a;
  const double* b;
  std::vector<double> a_buf, b_buf;
};

inline GemmOperands prepare(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                            std::span<const double> a, std::span<const double> b) {
  GemmOperands ops{a.data(), b.data(), {}, {}};
  if (trans_a) {
    ops.a_buf.resize(m * k);
    transpose(k, m, a.data(), ops.a_buf.data());
    ops.a = ops.a_buf.data();
  }
  if (trans_b) {
    ops.b_buf.resize(k * n);
    transpose(n, k, b.data(), ops.b_buf.data());
    ops.b = ops.b_buf.data();
  }
  return ops;
}

void check_gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                std::span<const double> a, std::span<const double> b, std::span<double> c);
void check_attention(const AttentionShape& s, std::size_t q, std::size_t k, std::size_t v,
                     std::size_t allow, std::size_t probs, std::size_t out);

/// One (batch, head) block of the attention forward pass.
void attention_block_forward(const AttentionShape& s, std::size_t b, std::size_t h, const double* q,
                             const double* k, const double* v, const unsigned char* allow, double* probs,
                             double* out);

void attention_block_backward(const AttentionShape& s, std::size_t b, std::size_t h, const double* q,
                              const double* k, const double* v, const double* probs, const double* dout,
                              double* dq, double* dk, double* dv);

}  // namespace demo::kernels::detail
