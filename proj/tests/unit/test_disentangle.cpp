#include <cmath>
#include <filesystem>
#include <fstream>

#include <Eigen/Dense>

#include "demo/core/error.hpp"
#include "demo/core/gradcheck.hpp"
#include "demo/core/linalg.hpp"
#include "demo/core/param_io.hpp"
#include "demo/disentangle/losses.hpp"
#include "demo/disentangle/trainer.hpp"
#include "doctest.h"

using namespace demo;
using namespace demo::disentangle;

namespace {

// Oracle cosine written out long-hand, independent of the library's helper.
double cos_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  long double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += (long double)a[i] * b[i];
    aa += (long double)a[i] * a[i];
    bb += (long double)b[i] * b[i];
  }
  return static_cast<double>(ab / std::sqrt(aa * bb));
}

std::vector<double> randvec(SeededRng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

motion::SurrogateExtractors identity_extractors(std::size_t d) {
  Tensor eye({d, d}, 0.0);
  for (std::size_t i = 0; i < d; ++i) eye(i, i) = 1.0;
  return {eye, eye};
}

}  // namespace

TEST_CASE("motion reconstruction loss") {
  const auto id = identity_extractors(2);
  CHECK(motion_recon_loss(Tensor::vector({0.3, -1.0}), Tensor::vector({0.3, -1.0}), id) == 0.0);
  CHECK(motion_recon_loss(Tensor::vector({1.0, 1.0}), Tensor::vector({0.0, 0.0}), id) == doctest::Approx(4.0));
  CHECK_THROWS_AS(motion_recon_loss(Tensor::vector({1.0}), Tensor::vector({1.0, 2.0}), id), DimensionError);

  // Direct re-evaluation through Eigen.
  motion::SurrogateExtractors ex(8, 5, 3, 11);
  SeededRng rng(4);
  const Tensor a = rng.normal_tensor({1, 8}), b = rng.normal_tensor({1, 8});
  const Eigen::RowVectorXd diff = to_eigen(a) - to_eigen(b);
  const double oracle = (diff * to_eigen(ex.map(motion::SurrogateExtractors::Which::kPhi))).squaredNorm() +
                        (diff * to_eigen(ex.map(motion::SurrogateExtractors::Which::kPsi))).squaredNorm();
  CHECK(std::abs(motion_recon_loss(a, b, ex) - oracle) < 1e-10);
}

TEST_CASE("eye contrastive closed forms") {
  const std::vector<double> fa{1.0, 0.0, 0.0}, same{2.0, 0.0, 0.0}, opp{-1.0, 0.0, 0.0};
  CHECK(std::abs(eye_contrastive_loss(same, same, fa) - std::log(2.0)) < 1e-12);
  const std::vector<double> r1{0.0, 1.0, 0.0}, r2{0.0, 0.0, 3.0};
  CHECK(std::abs(eye_contrastive_loss(r1, r2, fa) - std::log(2.0)) < 1e-12);
  const double best = eye_contrastive_loss(same, opp, fa);
  CHECK(std::abs(best - 0.126928011042972) < 1e-12);
  CHECK(std::abs(best - eye_contrastive_bounds().first) < 1e-15);
  CHECK(std::abs(eye_contrastive_loss(opp, same, fa) - eye_contrastive_bounds().second) < 1e-12);

  const std::vector<double> zero{0.0, 0.0, 0.0};
  CHECK_THROWS_AS(eye_contrastive_loss(zero, same, fa), ZeroVectorError);

  SeededRng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto f1 = randvec(rng, 6), f2 = randvec(rng, 6), f3 = randvec(rng, 6);
    const double s1 = cos_oracle(f1, f3), s2 = cos_oracle(f2, f3);
    const double oracle = -std::log(std::exp(s1) / (std::exp(s1) + std::exp(s2)));
    const double got = eye_contrastive_loss(f1, f2, f3);
    CHECK(std::abs(got - oracle) < 1e-12);
    const auto [lo, hi] = eye_contrastive_bounds();
    CHECK(got >= lo);
    CHECK(got <= hi);
  }
}

TEST_CASE("pose loss") {
  motion::PoseParams a;
  a.euler = {0.1, -0.2, 0.3};
  a.translation = {1.0, 2.0, -3.0};
  CHECK(pose_loss(a, a) == 0.0);
  motion::PoseParams b = a;
  b.euler[0] -= 0.1;
  b.translation[2] += 0.2;
  CHECK(std::abs(pose_loss(a, b) - 0.3) < 1e-12);

  // Subgradient sign of the batch form.
  Tape t;
  const Tensor pred = Tensor::from_rows({{0.5, -0.5, 0.0, 2.0, 0.0, -1.0}});
  const Tensor truth = Tensor::from_rows({{0.0, 0.0, 0.0, 1.0, 0.3, 1.0}});
  Var p = t.variable(pred);
  Var l = pose_loss(p, truth);
  CHECK(l.value().item() == doctest::Approx(0.5 + 0.5 + 1.0 + 0.3 + 2.0));
  t.backward(l);
  const auto& g = t.grad(p);
  for (std::size_t i = 0; i < 6; ++i) {
    const double d = pred[i] - truth[i];
    if (d != 0.0) CHECK(g[i] == doctest::Approx(d > 0 ? 1.0 : -1.0));
  }
}

TEST_CASE("infonce closed forms and structure") {
  const std::vector<double> q{1.0, 2.0, -1.0};
  for (std::size_t K : {1u, 5u, 15u}) {
    std::vector<std::span<const double>> negs(K, std::span<const double>(q));
    CHECK(std::abs(infonce(q, q, negs) - std::log(double(K + 1))) < 1e-12);
  }
  CHECK_THROWS_AS(infonce(q, q, {}), Error);

  SeededRng rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const auto a = randvec(rng, 5), p = randvec(rng, 5), n = randvec(rng, 5);
    // K = 1 is the two-way contrastive form with the anchor as query.
    CHECK(std::abs(infonce(a, p, {std::span<const double>(n)}) - eye_contrastive_loss(p, n, a)) < 1e-12);

    std::vector<std::vector<double>> negs;
    for (int k = 0; k < 7; ++k) negs.push_back(randvec(rng, 5));
    std::vector<std::span<const double>> views(negs.begin(), negs.end());
    double denom = std::exp(cos_oracle(a, p));
    for (const auto& nk : negs) denom += std::exp(cos_oracle(a, nk));
    CHECK(std::abs(infonce(a, p, views) - (-(cos_oracle(a, p)) + std::log(denom))) < 1e-12);
  }
}

TEST_CASE("infonce decreases as the positive moves toward the query") {
  SeededRng rng(21);
  const auto q = randvec(rng, 4);
  std::vector<std::vector<double>> negs;
  for (int k = 0; k < 5; ++k) negs.push_back(randvec(rng, 4));
  std::vector<std::span<const double>> views(negs.begin(), negs.end());
  auto pos = randvec(rng, 4);
  double prev_sim = cos_oracle(q, pos), prev = infonce(q, pos, views);
  for (int step = 1; step <= 20; ++step) {
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] += 0.1 * q[i];
    const double sim = cos_oracle(q, pos), loss = infonce(q, pos, views);
    REQUIRE(sim > prev_sim);
    CHECK(loss < prev);
    prev_sim = sim;
    prev = loss;
  }
}

TEST_CASE("batch losses average the per-row values") {
  SeededRng rng(33);
  const std::size_t n = 6, w = 4;
  const Tensor f1 = rng.normal_tensor({n, w}), f2 = rng.normal_tensor({n, w}), fa = rng.normal_tensor({n, w});
  Tape t;
  const double eye = eye_contrastive_loss(t.constant(f1), t.constant(f2), t.constant(fa)).value().item();
  const double nce = infonce(t.constant(f1), t.constant(f2)).value().item();
  double eye_ref = 0, nce_ref = 0;
  for (std::size_t i = 0; i < n; ++i) {
    eye_ref += eye_contrastive_loss(f1.row(i), f2.row(i), fa.row(i));
    std::vector<std::span<const double>> negs;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) negs.push_back(f2.row(j));
    nce_ref += infonce(f1.row(i), f2.row(i), negs);
  }
  CHECK(std::abs(eye - eye_ref / n) < 1e-12);
  CHECK(std::abs(nce - nce_ref / n) < 1e-12);

  motion::SurrogateExtractors ex(w, 3, 2, 1);
  const double rec = motion_recon_loss(t.constant(f1), f2, ex).value().item();
  double rec_ref = 0;
  for (std::size_t i = 0; i < n; ++i)
    rec_ref += motion_recon_loss(Tensor({1, w}, std::vector<double>(f1.row(i).begin(), f1.row(i).end())),
                                 Tensor({1, w}, std::vector<double>(f2.row(i).begin(), f2.row(i).end())), ex);
  CHECK(std::abs(rec - rec_ref / n) < 1e-12);
}

TEST_CASE("loss gradients match central differences") {
  SeededRng rng(17);
  const std::size_t n = 5, w = 4;
  const Tensor f2 = rng.normal_tensor({n, w}), fa = rng.normal_tensor({n, w});
  const Tensor x = rng.normal_tensor({n, w});
  motion::SurrogateExtractors ex(w, 3, 2, 3);

  auto rep = grad_check([&](Tape& t, Var v) { return eye_contrastive_loss(v, t.constant(f2), t.constant(fa)); }, x);
  CHECK(rep.passed);
  rep = grad_check([&](Tape& t, Var v) { return eye_contrastive_loss(t.constant(f2), t.constant(fa), v); }, x);
  CHECK(rep.passed);
  rep = grad_check([&](Tape& t, Var v) { return infonce(v, t.constant(f2)); }, x);
  CHECK(rep.passed);
  rep = grad_check([&](Tape& t, Var v) { return infonce(t.constant(f2), v, 0.3); }, x);
  CHECK(rep.passed);
  rep = grad_check([&](Tape&, Var v) { return motion_recon_loss(v, f2, ex); }, x, 1e-6, 1e-6);
  CHECK(rep.passed);
  const Tensor pose_truth = rng.normal_tensor({n, 6});
  const Tensor pose_x = rng.normal_tensor({n, 6});
  rep = grad_check([&](Tape&, Var v) { return pose_loss(v, pose_truth); }, pose_x, 1e-6, 1e-6);
  CHECK(rep.passed);
}

TEST_CASE("encoder stack: shapes, head wiring and checkpoint round trip") {
  EncoderConfig c;
  c.latent_dim = 10;
  c.audio_dim = 3;
  c.motion_dim = 7;
  c.hidden = 9;
  c.eye_dim = 4;
  c.lip_dim = 5;
  EncoderStack s(c, 42);
  SeededRng rng(1);
  const Tensor x = rng.normal_tensor({6, 10});
  CHECK(s.encode(x).shape() == Shape{6, 7});
  CHECK(s.eye_features(x).shape() == Shape{6, 4});
  CHECK(s.lip_features(x).shape() == Shape{6, 5});
  CHECK(s.pose_params(x).shape() == Shape{6, 6});
  CHECK(s.audio_features(rng.normal_tensor({6, 3})).shape() == Shape{6, 5});
  CHECK(s.decode(s.encode(x)).shape() == Shape{6, 10});
  // Heads see only E_mot output: identical motion features give identical heads.
  const Tensor via_m = infer([&](Tape& t, Var v) { return s.eye(t, v); }, s.encode(x));
  CHECK(max_abs_diff(via_m, s.eye_features(x)) == 0.0);

  const auto path = std::filesystem::temp_directory_path() / "demo_stack_roundtrip.bin";
  s.save(path.string());
  const EncoderStack back = EncoderStack::load(path.string());
  CHECK(back.config() == c);
  for (const auto* p : s.params().all()) CHECK(back.params().get(p->name).value == p->value);

  // A flipped byte breaks the checksum.
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(40);
    char ch;
    f.read(&ch, 1);
    f.seekp(40);
    ch = static_cast<char>(ch ^ 0x5A);
    f.write(&ch, 1);
  }
  CHECK_THROWS_AS(EncoderStack::load(path.string()), FormatError);
  std::filesystem::remove(path);
}

TEST_CASE("trainer: zero steps, determinism, divergence") {
  motion::WorldConfig wc;
  wc.latent_dim = 16;
  wc.dims = {4, 6, 2, 4};
  wc.signal.audio_channels = 4;
  const motion::MotionWorld world(wc);
  TrainerConfig tc;
  tc.encoder.hidden = 16;
  tc.encoder.motion_dim = 12;
  tc.pool_sequences = 16;
  tc.batch = 8;
  tc.seed = 3;

  tc.steps = 0;
  const auto fresh = train_disentangler(tc, world);
  CHECK(fresh.history.empty());
  tc.steps = 1;
  const auto one = train_disentangler(tc, world);
  bool moved = false;
  for (const auto* p : fresh.stack.params().all()) {
    moved = moved || !(one.stack.params().get(p->name).value == p->value);
  }
  CHECK(moved);
  // Zero steps is the initial stack: the first recorded loss is computed on it.
  tc.steps = 0;
  CHECK(train_disentangler(tc, world).stack.params().get("E_mot.0.weight").value ==
        fresh.stack.params().get("E_mot.0.weight").value);

  tc.steps = 40;
  const auto a = train_disentangler(tc, world), b = train_disentangler(tc, world);
  REQUIRE(a.history.size() == 40);
  for (std::size_t i = 0; i < 40; ++i) CHECK(a.history[i].total == b.history[i].total);
  for (const auto* p : a.stack.params().all()) CHECK(b.stack.params().get(p->name).value == p->value);
  CHECK(a.history.back().total < a.history.front().total);

  tc.objective = Objective::kVae;
  const auto v = train_disentangler(tc, world);
  CHECK(v.stack.config().variational);
  CHECK(v.history.back().mot < v.history.front().mot);
  CHECK(v.history.front().eye == 0.0);

  tc.objective = Objective::kFcme;
  tc.lr = 1e200;
  CHECK_THROWS_AS(train_disentangler(tc, world), DivergenceError);
}
