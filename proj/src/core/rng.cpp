#include "demo/core/rng.hpp"

#include <cmath>
#include <numbers>

namespace demo {

namespace {
constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t SeededRng::next_u64() noexcept {
  ++counter_;
  return mix64(seed_ + counter_ * kGamma);
}

double SeededRng::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t SeededRng::below(std::uint64_t n) noexcept {
  if (n <= 1) return 0;
  // Lemire's multiply-shift with rejection.
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t x = next_u64();
    const unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
    if (static_cast<std::uint64_t>(m) >= threshold) return static_cast<std::uint64_t>(m >> 64);
  }
}

SeededRng SeededRng::fork(std::uint64_t stream) const noexcept {
  return SeededRng(mix64(seed_ ^ mix64(stream + kGamma)));
}

Tensor SeededRng::normal_tensor(Shape shape, double stddev) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = stddev * normal();
  return t;
}

Tensor SeededRng::uniform_tensor(Shape shape, double lo, double hi) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = uniform(lo, hi);
  return t;
}

}  // namespace demo
