#include "kernels_detail.hpp"

namespace demo::kernels::serial {

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
          std::span<const double> b, std::span<double> c, bool accumulate) {
  detail::check_gemm(trans_a, trans_b, m, n, k, a, b, c);
  const auto ops = detail::prepare(trans_a, trans_b, m, n, k, a, b);
  for (std::size_t i = 0; i < m; ++i) detail::gemm_row(n, k, ops.a + i * k, ops.b, c.data() + i * n, accumulate);
}

void attention_forward(const AttentionShape& s, std::span<const double> q, std::span<const double> k,
                       std::span<const double> v, std::span<const unsigned char> allow, std::span<double> probs,
                       std::span<double> out) {
  detail::check_attention(s, q.size(), k.size(), v.size(), allow.size(), probs.size(), out.size());
  for (std::size_t b = 0; b < s.batch; ++b)
    for (std::size_t h = 0; h < s.heads; ++h)
      detail::attention_block_forward(s, b, h, q.data(), k.data(), v.data(), allow.data(), probs.data(),
                                      out.data());
}

void attention_backward(const AttentionShape& s, std::span<const double> q, std::span<const double> k,
                        std::span<const double> v, std::span<const double> probs, std::span<const double> dout,
                        std::span<double> dq, std::span<double> dk, std::span<double> dv) {
  detail::check_attention(s, q.size(), k.size(), v.size(), s.frames * s.frames, probs.size(), dout.size());
  for (std::size_t b = 0; b < s.batch; ++b)
    for (std::size_t h = 0; h < s.heads; ++h)
      detail::attention_block_backward(s, b, h, q.data(), k.data(), v.data(), probs.data(), dout.data(),
                                       dq.data(), dk.data(), dv.data());
}

}  // namespace demo::kernels::serial
