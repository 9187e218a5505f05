#include <cmath>
#include <numbers>
#include <sstream>

#include "demo/core/error.hpp"
#include "demo/core/linalg.hpp"
#include "demo/core/numeric.hpp"
#include "demo/core/rng.hpp"
#include "demo/motion/sequence_io.hpp"
#include "demo/motion/world.hpp"
#include "doctest.h"

using namespace demo;
using namespace demo::motion;

namespace {

double max_abs(const Tensor& t) {
  double m = 0;
  for (double v : t.data()) m = std::max(m, std::abs(v));
  return m;
}

Tensor identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

}  // namespace

TEST_CASE("factor spaces are orthonormal and mutually orthogonal") {
  SUBCASE("d=4, one dim per factor") {
    auto fs = build_factor_spaces(4, {1, 1, 1, 1}, 3);
    Tensor all({4, 4});
    for (auto f : kAllFactors) {
      CHECK(fs[f].dim() == 1);
      for (std::size_t r = 0; r < 4; ++r) all(r, index_of(f)) = fs[f].basis(r, 0);
    }
    CHECK(max_abs_diff(matmul(transpose(all), all), identity(4)) < 1e-12);
  }
  SUBCASE("d=32 default split") {
    auto fs = build_factor_spaces(32, {6, 6, 4, 16}, 11);
    for (auto f : kAllFactors) {
      CHECK(max_abs_diff(matmul(transpose(fs[f].basis), fs[f].basis), identity(fs[f].dim())) < 1e-10);
      for (auto g : kAllFactors) {
        if (f == g) continue;
        CHECK(max_abs(matmul(transpose(fs[f].basis), fs[g].basis)) < 1e-10);
      }
    }
  }
  SUBCASE("over capacity") {
    CHECK_THROWS_AS(build_factor_spaces(4, {2, 1, 1, 1}, 1), CapacityError);
    CHECK_THROWS_AS(build_factor_spaces(32, {6, 6, 4, 17}, 1), CapacityError);
  }
}

TEST_CASE("projector algebra") {
  auto fs = build_factor_spaces(32, {6, 6, 4, 10}, 5);  // 6 unused dims
  Tensor sum_p({32, 32});
  for (auto f : kAllFactors) {
    const Tensor p = fs.projector(f);
    CHECK(max_abs_diff(matmul(p, p), p) < 1e-10);
    for (std::size_t i = 0; i < p.size(); ++i) sum_p[i] += p[i];
  }
  CHECK(max_abs_diff(matmul(sum_p, sum_p), sum_p) < 1e-10);

  // Editing one factor moves the latent only inside that factor's subspace.
  SeededRng rng(6);
  Tensor x = rng.normal_tensor({5, 32});
  for (auto f : kAllFactors) {
    Tensor edited = edit_factor(x, f, rng.normal_tensor({5, fs.dims().of(f)}), fs);
    Tensor delta = edited;
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] -= x[i];
    Tensor outside = delta;
    const Tensor inside = fs.project(f, delta);
    for (std::size_t i = 0; i < outside.size(); ++i) outside[i] -= inside[i];
    CHECK(max_abs(outside) < 1e-10);
  }
}

TEST_CASE("synthesized sequences") {
  MotionWorld world(WorldConfig{});
  SUBCASE("exact factor reconstruction") {
    auto [seq, cond] = synthesize_sequence(16, world, 1);
    CHECK(seq.latents.rows() == 16);
    CHECK(seq.latents.cols() == 32);
    CHECK(max_abs_diff(world.spaces().compose(seq.coeffs), seq.latents) < 1e-10);
    for (auto f : kAllFactors)
      CHECK(max_abs_diff(world.spaces().coefficients(f, seq.latents), seq.coeffs[index_of(f)]) < 1e-10);
    CHECK(cond.width() == world.condition_dim());
    CHECK(max_abs_diff(cond.audio(), cond.audio()) == 0.0);
  }
  SUBCASE("single frame") {
    auto [seq, cond] = synthesize_sequence(1, world, 2);
    CHECK(seq.frames() == 1);
    CHECK(cond.frames() == 1);
    CHECK(max_abs_diff(world.lip_from_audio(cond.audio()), seq.coeffs[index_of(Factor::kLip)]) < 1e-12);
  }
  SUBCASE("determinism") {
    auto a = synthesize_sequence(16, world, 3);
    auto b = synthesize_sequence(16, world, 3);
    auto c = synthesize_sequence(16, world, 4);
    CHECK(a.first.latents == b.first.latents);
    CHECK(a.second.channels == b.second.channels);
    CHECK_FALSE(a.first.latents == c.first.latents);
    MotionWorld w2(WorldConfig{});
    CHECK(w2.lip_map() == world.lip_map());
  }
  SUBCASE("side channels carry pose and eye coefficients") {
    auto [seq, cond] = synthesize_sequence(8, world, 5);
    for (std::size_t f = 0; f < 8; ++f) {
      for (std::size_t j = 0; j < 6; ++j) CHECK(cond.channels(f, cond.pose_offset() + j) == seq.coeffs[1](f, j));
      for (std::size_t j = 0; j < 4; ++j) CHECK(cond.channels(f, cond.eye_offset() + j) == seq.coeffs[2](f, j));
    }
  }
  SUBCASE("eye is piecewise constant, pose moves every frame") {
    auto [seq, cond] = synthesize_sequence(400, world, 6);
    std::size_t eye_changes = 0, pose_changes = 0;
    for (std::size_t f = 1; f < 400; ++f) {
      eye_changes += seq.coeffs[2](f, 0) != seq.coeffs[2](f - 1, 0);
      pose_changes += seq.coeffs[1](f, 0) != seq.coeffs[1](f - 1, 0);
    }
    CHECK(eye_changes > 15);
    CHECK(eye_changes < 80);
    CHECK(pose_changes == 399);
  }
}

TEST_CASE("lip coefficients are predictable from audio by least squares") {
  for (auto mode : {LipMode::kLinear, LipMode::kNonlinear}) {
    WorldConfig cfg;
    cfg.signal.lip_mode = mode;
    MotionWorld world(cfg);
    Tensor audio({64 * 16, cfg.signal.audio_channels}), lip({64 * 16, cfg.dims.lip});
    for (std::size_t s = 0; s < 64; ++s) {
      auto [seq, cond] = synthesize_sequence(16, world, 100 + s);
      const Tensor a = cond.audio();
      for (std::size_t f = 0; f < 16; ++f) {
        for (std::size_t c = 0; c < a.cols(); ++c) audio(s * 16 + f, c) = a(f, c);
        for (std::size_t c = 0; c < cfg.dims.lip; ++c) lip(s * 16 + f, c) = seq.coeffs[0](f, c);
      }
    }
    const auto probe = LinearProbe::fit(audio, lip);
    const double r2 = r_squared(probe.predict(audio), lip);
    if (mode == LipMode::kLinear) {
      CHECK(r2 > 0.99);
      CHECK(max_abs_diff(probe.predict(audio), lip) < 1e-6);
    } else {
      CHECK(r2 > 0.95);
    }
  }
}

TEST_CASE("composite anchor") {
  MotionWorld world(WorldConfig{});
  const auto& fs = world.spaces();
  auto [s1, c1] = synthesize_sequence(4, world, 7);
  auto [s2, c2] = synthesize_sequence(4, world, 8);

  CHECK(max_abs_diff(composite_anchor(s1.latents, s1.latents, fs), s1.latents) < 1e-12);

  const Tensor anchor = composite_anchor(s1.latents, s2.latents, fs);
  CHECK(max_abs_diff(fs.coefficients(Factor::kEye, anchor), s1.coeffs[2]) < 1e-12);
  for (auto f : {Factor::kLip, Factor::kPose, Factor::kResidual})
    CHECK(max_abs_diff(fs.coefficients(f, anchor), s2.coeffs[index_of(f)]) < 1e-12);

  // Explicit projector oracle.
  SeededRng rng(9);
  const Tensor p_eye = fs.projector(Factor::kEye);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor v1 = rng.normal_tensor({1, 32}), v2 = rng.normal_tensor({1, 32});
    Tensor expect({1, 32});
    for (std::size_t i = 0; i < 32; ++i) {
      double a = 0, b = 0;
      for (std::size_t j = 0; j < 32; ++j) {
        a += p_eye(i, j) * v1[j];
        b += p_eye(i, j) * v2[j];
      }
      expect[i] = a + v2[i] - b;
    }
    CHECK(max_abs_diff(composite_anchor(v1, v2, fs), expect) < 1e-10);
  }
  CHECK_THROWS_AS(composite_anchor(Tensor({1, 31}), Tensor({1, 31}), fs), DimensionError);
}

TEST_CASE("surrogate extractors") {
  SurrogateExtractors ex(8, 4, 3, 42);
  using W = SurrogateExtractors::Which;
  CHECK(max_abs(ex.extract(Tensor({1, 8}), W::kPhi)) == 0.0);
  SeededRng rng(1);
  Tensor a = rng.normal_tensor({1, 8}), b = rng.normal_tensor({1, 8}), ab = a;
  for (std::size_t i = 0; i < 8; ++i) ab[i] += b[i];
  for (auto w : {W::kPhi, W::kPsi}) {
    Tensor sum_ab = ex.extract(a, w);
    const Tensor fb = ex.extract(b, w);
    for (std::size_t i = 0; i < sum_ab.size(); ++i) sum_ab[i] += fb[i];
    CHECK(max_abs_diff(ex.extract(ab, w), sum_ab) < 1e-12);
  }
  // Golden vector recorded from the first run (seed 42, d=8, p=4).
  Tensor x({1, 8});
  for (int i = 0; i < 8; ++i) x[i] = 0.25 * (i + 1) - 1.0;
  const Tensor y = ex.extract(x, W::kPhi);
  const double golden[] = {-0.15902890263300035, -0.76906254163455445, 0.3841921397247392, -1.2143805891677975};
  for (int i = 0; i < 4; ++i) CHECK(std::abs(y[i] - golden[i]) < 1e-14);
  CHECK(SurrogateExtractors(8, 4, 3, 42).map(W::kPsi) == ex.map(W::kPsi));
}

TEST_CASE("pose ground truth") {
  const double zero[6] = {};
  const auto p0 = pose_ground_truth(zero);
  for (double v : p0.flat()) CHECK(v == 0.0);
  const double five[5] = {};
  CHECK_THROWS_AS(pose_ground_truth(five), DimensionError);

  double prev = -std::numbers::pi;
  for (double c = -50.0; c <= 50.0; c += 0.01) {
    const double a = squash_angle(c);
    REQUIRE(a > prev);
    REQUIRE(a > -std::numbers::pi);
    REQUIRE(a < std::numbers::pi);
    prev = a;
  }
  SeededRng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(-3.0, 3.0);
    REQUIRE(std::abs(unsquash_angle(squash_angle(x)) - x) <= 1e-9 * std::max(std::abs(x), 1e-300));
  }
}

TEST_CASE("sequence file round trip and validation") {
  MotionWorld world(WorldConfig{});
  auto [seq, cond] = synthesize_sequence(5, world, 77);
  SequenceFile file{32, world.config().dims, 8, 77, 7, seq.latents, cond.channels};
  std::stringstream ss;
  write_sequence(ss, file);
  const std::string text = ss.str();
  CHECK(text.rfind("#demo-sequence,format_version=1,d=32,F=5,lip=6,pose=6,eye=4,residual=16,audio=8,cond=18,seed=77,world_seed=7\n", 0) == 0);
  std::istringstream in(text);
  CHECK(read_sequence(in) == file);

  std::istringstream bad_version("#demo-sequence,format_version=9,d=1\n");
  CHECK_THROWS_AS(read_sequence(bad_version), FormatError);
  std::istringstream truncated(text.substr(0, text.size() / 2));
  CHECK_THROWS_AS(read_sequence(truncated), FormatError);
  std::istringstream garbage("hello\n");
  CHECK_THROWS_AS(read_sequence(garbage), FormatError);
}
