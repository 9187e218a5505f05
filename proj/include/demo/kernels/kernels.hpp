#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Dense compute kernels. Each kernel has a serial reference in
// demo::kernels::serial and an OpenMP variant in demo::kernels::omp. The OpenMP
// variants split work only across independent output rows (or independent
// batch/head blocks) and run the same per-row code as the serial reference,
// so both produce bit-identical results for any thread count.

namespace demo::kernels {

/// Row-major attention geometry: `batch` samples of `frames` rows each, with
/// `heads` heads splitting the `width` columns evenly.
struct AttentionShape {
  std::size_t batch = 1;
  std::size_t frames = 1;
  std::size_t heads = 1;
  std::size_t width = 1;
  std::size_t head_dim() const { return width / heads; }
};

namespace serial {

/// C[m x n] (+)= op(A) * op(B), op = transpose when the flag is set.
/// A is m x k (or k x m when trans_a), B is k x n (or n x k when trans_b).
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          std::span<const double> a, std::span<const double> b, std::span<double> c,
          bool accumulate);

/// Forward masked multi-head attention. `allow` is frames x frames, row-major.
/// Writes probabilities (batch*heads*frames*frames) for the backward pass.
void attention_forward(const AttentionShape& s, std::span<const double> q, std::span<const double> k,
                       std::span<const double> v, std::span<const unsigned char> allow,
                       std::span<double> probs, std::span<double> out);

/// Accumulates into dq, dk, dv.
void attention_backward(const AttentionShape& s, std::span<const double> q, std::span<const double> k,
                        std::span<const double> v, std::span<const double> probs,
                        std::span<const double> dout, std::span<double> dq, std::span<double> dk,
                        std::span<double> dv);

}  // namespace serial

namespace omp {

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          std::span<const double> a, std::span<const double> b, std::span<double> c,
          bool accumulate);

void attention_forward(const AttentionShape& s, std::span<const double> q, std::span<const double> k,
                       std::span<const double> v, std::span<const unsigned char> allow,
                       std::span<double> probs, std::span<double> out);

void attention_backward(const AttentionShape& s, std::span<const double> q, std::span<const double> k,
                        std::span<const double> v, std::span<const double> probs,
                        std::span<const double> dout, std::span<double> dq, std::span<double> dk,
                        std::span<double> dv);

}  // namespace omp

/// Numerically stable softmax of one row. Masked entries (allow == 0) come out
/// exactly zero. Throws DegenerateMaskError when every entry is masked.
void softmax_row(std::span<const double> x, std::span<const unsigned char> allow, std::span<double> out);

/// Runtime switch used by the dispatching entry points below. Defaults to the
/// OpenMP variant when the library was built with OpenMP.
void set_parallel(bool enabled) noexcept;
bool parallel_enabled() noexcept;
bool openmp_available() noexcept;
int max_threads() noexcept;

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          std::span<const double> a, std::span<const double> b, std::span<double> c,
          bool accumulate);
void attention_forward(const AttentionShape& s, std::span<const double> q, std::span<const double> k,
                       std::span<const double> v, std::span<const unsigned char> allow,
                       std::span<double> probs, std::span<double> out);
void attention_backward(const AttentionShape& s, std::span<const double> q, std::span<const double> k,
                        std::span<const double> v, std::span<const double> probs,
                        std::span<const double> dout, std::span<double> dq, std::span<double> dk,
                        std::span<double> dv);

}  // namespace demo::kernels
