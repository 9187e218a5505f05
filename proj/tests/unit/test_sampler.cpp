#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

#include "demo/core/error.hpp"
#include "demo/sampler/sampler.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace demo;
using namespace demo::sampler;

TEST_CASE("euler on constant fields is exact") {
  // Dyadic data and power-of-two step counts: every partial sum is representable.
  const Tensor xd = Tensor::vector({0.5, -3.0, 1.25}), bd = Tensor::vector({2.0, -0.75, 4.0});
  const Field dyadic = [&](const Tensor&, double) { return bd; };
  for (std::size_t n : {1u, 2u, 8u, 64u, 1024u}) {
    const auto tr = euler_integrate(dyadic, xd, n);
    for (std::size_t i = 0; i < xd.size(); ++i) CHECK(tr.final_state()[i] == xd[i] + bd[i]);
  }
  // Generic data: machine precision, a few ulps per step at most.
  SeededRng rng(1);
  const Tensor x0 = rng.normal_tensor({3, 2}), b = rng.normal_tensor({3, 2});
  const Field constant = [&](const Tensor&, double) { return b; };
  for (std::size_t n : {1u, 3u, 7u, 10u, 100u, 1024u}) {
    const auto tr = euler_integrate(constant, x0, n);
    for (std::size_t i = 0; i < x0.size(); ++i) {
      const double bound = 2.0 * n * 0x1.0p-52 * (std::abs(x0[i]) + std::abs(b[i]));
      CHECK(std::abs(tr.final_state()[i] - (x0[i] + b[i])) <= bound);
    }
  }
}

TEST_CASE("euler closed forms and grid") {
  const Field identity = [](const Tensor& x, double) { return x; };
  const Tensor x0 = Tensor::vector({2.0});
  const auto tr = euler_integrate(identity, x0, 10);
  CHECK(std::abs(tr.final_state()[0] - std::pow(1.1, 10) * 2.0) < 1e-12);
  CHECK(std::abs(tr.final_state()[0] / 2.0 - 2.5937424601) < 1e-10);
  REQUIRE(tr.states.size() == 11);
  for (std::size_t k = 0; k <= 10; ++k) CHECK(tr.times[k] == static_cast<double>(k) / 10.0);
  CHECK(tr.states[0] == x0);

  const Field timed = [](const Tensor& x, double t) {
    Tensor v = x;
    for (auto& e : v.data()) e = 3.0 + t;
    return v;
  };
  const auto one = euler_integrate(timed, x0, 1);
  CHECK(one.states.size() == 2);
  CHECK(one.final_state()[0] == 2.0 + 3.0);

  CHECK_THROWS_AS(euler_integrate(identity, x0, 0), ConfigError);
  const Field blowup = [](const Tensor& x, double) {
    Tensor v = x;
    for (auto& e : v.data()) e = 1e308;
    return v;
  };
  CHECK_THROWS_AS(euler_integrate(blowup, Tensor::vector({1e308}), 4), DivergenceError);
}

TEST_CASE("first-order convergence against the matrix exponential") {
  const Eigen::Matrix3d a{{-0.5, 1.0, 0.2}, {-1.0, -0.3, 0.0}, {0.1, 0.4, -0.8}};
  const Tensor x0 = Tensor::vector({1.0, -0.5, 2.0});

  // The library's exact solution agrees with the independent oracle.
  std::vector<long double> al(9);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) al[i * 3 + j] = a(i, j);
  const auto e = oracle::expm(al, 3);
  const Eigen::Matrix3d ea = a.exp();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(std::abs(static_cast<double>(e[i * 3 + j]) - ea(i, j)) < 1e-13);

  const auto table = convergence_probe(a, x0, {8, 16, 32, 64, 128});
  CHECK(table.order >= 0.9);
  CHECK(table.order <= 1.1);
  for (std::size_t k = 0; k + 1 < table.rows.size(); ++k) {
    const double ratio = table.rows[k].error / table.rows[k + 1].error;
    CHECK(ratio >= 1.7);
    CHECK(ratio <= 2.3);
  }
  const auto zero = convergence_probe(Eigen::Matrix3d::Zero(), x0, {8, 16});
  for (const auto& r : zero.rows) CHECK(r.error == 0.0);
}

TEST_CASE("sliding-window generation") {
  auto cfg = field::micro_preset();
  cfg.cond_dim = 2;
  cfg.context_frames = 2;
  field::FieldNet net(cfg, 5);
  SeededRng rng(6);
  for (auto* p : net.params().all())
    for (auto& v : p->value.data()) v = 0.3 * rng.normal();
  SolverConfig sc;
  sc.window = cfg.F + 2;
  sc.context = 2;
  sc.steps = 6;

  const std::size_t M = 10;
  const Tensor cond = rng.normal_tensor({M, 2});
  const Tensor a = generate(net, cond, M, sc, 11), b = generate(net, cond, M, sc, 11);
  CHECK(a.shape() == Shape{M, cfg.d});
  CHECK(a == b);
  CHECK_FALSE(a == generate(net, cond, M, sc, 12));

  // Batch composition does not change any sequence.
  const Tensor cond2 = rng.normal_tensor({M, 2});
  const auto both = generate(net, {cond2, cond}, M, sc, {99, 11});
  CHECK(both[1] == a);
  CHECK(both[0] == generate(net, cond2, M, sc, 99));

  // The first segment is Euler from the segment-0 noise with zero context.
  flow::FlowBatch first;
  first.cond = Tensor({cfg.F, 2}, std::vector<double>(cond.data().begin(), cond.data().begin() + cfg.F * 2));
  first.context = Tensor({1, 2 * cfg.d}, 0.0);
  const Tensor noise = SeededRng(11).fork(0).normal_tensor({cfg.F, cfg.d});
  const Tensor seg0 = euler_integrate(
                          [&](const Tensor& x, double t) { return net.predict(flow::make_input(first, x, {t})); },
                          noise, sc.steps)
                          .final_state();
  for (std::size_t i = 0; i < seg0.size(); ++i) CHECK(a[i] == seg0[i]);

  // Single segment when M equals the new-frame count.
  const Tensor short_cond({cfg.F, 2}, std::vector<double>(cond.data().begin(), cond.data().begin() + cfg.F * 2));
  CHECK(generate(net, short_cond, cfg.F, sc, 11) == seg0);

  CHECK_THROWS_AS(generate(net, cond, M + 1, sc, 1), DimensionError);
  CHECK_THROWS_AS(generate(net, Tensor({2, 2}), 2, sc, 1), DimensionError);
  SolverConfig bad = sc;
  bad.context = bad.window;
  CHECK_THROWS_AS(generate(net, cond, M, bad, 1), ConfigError);
  bad = sc;
  bad.window += 1;
  CHECK_THROWS_AS(generate(net, cond, M, bad, 1), ConfigError);
}
