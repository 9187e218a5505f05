#pragma once

#include <cstdint>
#include <string_view>

#include "demo/core/tensor.hpp"

namespace demo {

/// Counter-based SplitMix64 stream.
///
/// Draw k (0-based) of a stream with seed s is mix64(s + (k + 1) * 0x9E3779B97F4A7C15),
/// where mix64 is the SplitMix64 finalizer. Uniform doubles take the top 53 bits:
/// (u >> 11) * 2^-53, giving values in [0, 1). Normals use Box-Muller on two
/// consecutive uniforms (1 - u1 keeps the log argument positive) and cache the
/// sine branch. Integer generation is platform independent; normals depend on
/// the platform's log/sqrt/cos.
class SeededRng {
 public:
  static constexpr std::string_view kAlgorithm = "splitmix64-counter/v1";

  explicit SeededRng(std::uint64_t seed = 0) noexcept : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept;
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  double normal() noexcept;
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;
  bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Independent child stream, keyed by a stream id.
  SeededRng fork(std::uint64_t stream) const noexcept;

  Tensor normal_tensor(Shape shape, double stddev = 1.0);
  Tensor uniform_tensor(Shape shape, double lo, double hi);

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t z) noexcept;

}  // namespace demo
