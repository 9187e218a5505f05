// Serial reference vs OpenMP kernels at the shapes the field predictor uses.

#include <benchmark/benchmark.h>

#include "demo/core/rng.hpp"
#include "demo/kernels/kernels.hpp"

namespace {

using demo::SeededRng;
namespace k = demo::kernels;

template <bool Parallel>
void BM_Gemm(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const auto kk = static_cast<std::size_t>(state.range(2));
  SeededRng rng(1);
  auto a = rng.normal_tensor({m * kk}).storage();
  auto b = rng.normal_tensor({kk * n}).storage();
  std::vector<double> c(m * n);
  for (auto _ : state) {
    if constexpr (Parallel)
      k::omp::gemm(false, false, m, n, kk, a, b, c, false);
    else
      k::serial::gemm(false, false, m, n, kk, a, b, c, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOP/s"] =
      benchmark::Counter(2.0 * m * n * kk * state.iterations(), benchmark::Counter::kIsRate, benchmark::Counter::kIs1000);
}

template <bool Parallel>
void BM_Attention(benchmark::State& state) {
  k::AttentionShape s{static_cast<std::size_t>(state.range(0)), 16, 4, 64};
  const std::size_t rows = s.batch * s.frames * s.width;
  SeededRng rng(2);
  auto q = rng.normal_tensor({rows}).storage();
  auto kk = rng.normal_tensor({rows}).storage();
  auto v = rng.normal_tensor({rows}).storage();
  std::vector<unsigned char> allow(s.frames * s.frames);
  for (std::size_t f = 0; f < s.frames; ++f)
    for (std::size_t g = 0; g < s.frames; ++g) allow[f * s.frames + g] = (f > g ? f - g : g - f) <= 4;
  std::vector<double> probs(s.batch * s.heads * s.frames * s.frames), out(rows);
  for (auto _ : state) {
    if constexpr (Parallel)
      k::omp::attention_forward(s, q, kk, v, allow, probs, out);
    else
      k::serial::attention_forward(s, q, kk, v, allow, probs, out);
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(BM_Gemm<false>)->Args({256, 64, 64})->Args({256, 384, 64})->Args({256, 256, 64})->Args({512, 512, 512});
BENCHMARK(BM_Gemm<true>)->Args({256, 64, 64})->Args({256, 384, 64})->Args({256, 256, 64})->Args({512, 512, 512});
BENCHMARK(BM_Attention<false>)->Arg(16)->Arg(64);
BENCHMARK(BM_Attention<true>)->Arg(16)->Arg(64);

BENCHMARK_MAIN();
