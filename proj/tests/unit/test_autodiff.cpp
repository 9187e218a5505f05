#include <cmath>

#include "demo/core/error.hpp"
#include "demo/core/gradcheck.hpp"
#include "demo/core/nn.hpp"
#include "demo/core/optim.hpp"
#include "doctest.h"

using namespace demo;

namespace {

/// Contracts an op's output with fixed random weights so every output
/// coordinate contributes to the scalar being checked.
Var contract(Tape& t, Var y, std::uint64_t seed) {
  SeededRng rng(seed);
  return ops::sum(ops::mul(y, t.constant(rng.normal_tensor(y.shape()))));
}

void check_unary(const char* name, const std::function<Var(Tape&, Var)>& op, Shape shape, double tol = 1e-4,
                 double spread = 1.0) {
  CAPTURE(name);
  SeededRng rng(123);
  Tensor x = rng.normal_tensor(shape, spread);
  auto report = grad_check([&](Tape& t, Var v) { return contract(t, op(t, v), 99); }, x, 1e-6, tol);
  CAPTURE(report.max_rel_error);
  CHECK(report.passed);
}

}  // namespace

TEST_CASE("backward examples") {
  {
    Tape t;
    Var x = t.variable(Tensor({2, 3}, 0.7));
    t.backward(ops::sum(x));
    for (double g : t.grad(x).data()) CHECK(g == 1.0);
  }
  {
    Tape t;
    Var x = t.variable(Tensor::scalar(3.0));
    t.backward(ops::mul(x, x));
    CHECK(t.grad(x).item() == 6.0);
  }
}

TEST_CASE("tape misuse is rejected") {
  Tape t;
  Var x = t.variable(Tensor({2}, 1.0));
  CHECK_THROWS_AS(t.backward(ops::scale(x, 2.0)), TapeError);
  Var l = ops::sum(x);
  t.backward(l);
  CHECK_THROWS_AS(t.backward(l), TapeError);
  CHECK_THROWS_AS(t.constant(Tensor({1})), TapeError);

  Tape other;
  Var y = other.variable(Tensor({2}, 1.0));
  Tape third;
  Var z = third.variable(Tensor({2}, 1.0));
  CHECK_THROWS_AS(ops::add(y, z), TapeError);
}

TEST_CASE("matmul gradient matches finite differences") {
  SeededRng rng(4);
  Tensor a = rng.normal_tensor({4, 5});
  Tensor b = rng.normal_tensor({5, 3});
  auto ra = grad_check([&](Tape& t, Var v) { return ops::sum(ops::matmul(v, t.constant(b))); }, a, 1e-6, 1e-6);
  auto rb = grad_check([&](Tape& t, Var v) { return ops::sum(ops::matmul(t.constant(a), v)); }, b, 1e-6, 1e-6);
  CHECK(ra.passed);
  CHECK(rb.passed);
  auto rnt = grad_check([&](Tape& t, Var v) { return contract(t, ops::matmul_nt(v, t.constant(a)), 1); },
                        rng.normal_tensor({3, 5}), 1e-6, 1e-6);
  CHECK(rnt.passed);
  auto rnt2 = grad_check([&](Tape& t, Var v) { return contract(t, ops::matmul_nt(t.constant(a), v), 1); },
                         rng.normal_tensor({3, 5}), 1e-6, 1e-6);
  CHECK(rnt2.passed);
}

TEST_CASE("linear ops pass at 1e-6") {
  SeededRng rng(8);
  Tensor other = rng.normal_tensor({3, 4});
  Tensor row = rng.normal_tensor({1, 4});
  check_unary("add", [&](Tape& t, Var v) { return ops::add(v, t.constant(other)); }, {3, 4}, 1e-6);
  check_unary("sub", [&](Tape& t, Var v) { return ops::sub(t.constant(other), v); }, {3, 4}, 1e-6);
  check_unary("scale", [](Tape&, Var v) { return ops::scale(v, -2.5); }, {3, 4}, 1e-6);
  check_unary("add_row", [&](Tape& t, Var v) { return ops::add_row(t.constant(other), v); }, {1, 4}, 1e-6);
  check_unary("repeat_rows", [](Tape&, Var v) { return ops::repeat_rows(v, 3); }, {2, 4}, 1e-6);
  check_unary("slice_cols", [](Tape&, Var v) { return ops::slice_cols(v, 1, 2); }, {3, 4}, 1e-6);
  check_unary("concat_cols", [&](Tape& t, Var v) { return ops::concat_cols({t.constant(other), v, v}); }, {3, 2},
              1e-6);
  check_unary("frame_diff", [](Tape&, Var v) { return ops::frame_diff(v, 2, 3); }, {6, 4}, 1e-6);
  check_unary("mean", [](Tape&, Var v) { return ops::mean(v); }, {3, 4}, 1e-6);
}

TEST_CASE("nonlinear ops pass at 1e-4") {
  SeededRng rng(9);
  Tensor other = rng.normal_tensor({3, 4});
  Tensor row = rng.normal_tensor({1, 4});
  check_unary("mul", [&](Tape& t, Var v) { return ops::mul(v, t.constant(other)); }, {3, 4});
  check_unary("mul self", [](Tape&, Var v) { return ops::mul(v, v); }, {3, 4});
  check_unary("mul_row a", [&](Tape& t, Var v) { return ops::mul_row(v, t.constant(row)); }, {3, 4});
  check_unary("mul_row r", [&](Tape& t, Var v) { return ops::mul_row(t.constant(other), v); }, {1, 4});
  check_unary("tanh", [](Tape&, Var v) { return ops::tanh(v); }, {3, 4});
  check_unary("gelu", [](Tape&, Var v) { return ops::gelu(v); }, {3, 4}, 1e-4, 2.0);
  check_unary("exp", [](Tape&, Var v) { return ops::exp(v); }, {3, 4});
  check_unary("layer_norm", [](Tape&, Var v) { return ops::layer_norm(v, 1e-5); }, {3, 6});
  check_unary("softmax", [](Tape&, Var v) { return ops::softmax(v); }, {3, 5});
  static const unsigned char mask[] = {1, 0, 1, 1, 1, 1, 0, 0, 1};
  check_unary("softmax masked", [](Tape&, Var v) { return ops::softmax(v, mask); }, {3, 3});
  check_unary("normalize_rows", [](Tape&, Var v) { return ops::normalize_rows(v); }, {3, 4});
  check_unary("row_dot", [&](Tape& t, Var v) { return ops::row_dot(v, t.constant(other)); }, {3, 4});
  static const std::size_t targets[] = {0, 3, 1};
  check_unary("cross_entropy", [](Tape&, Var v) { return ops::cross_entropy_rows(v, targets); }, {3, 4});
  check_unary("mse", [&](Tape& t, Var v) { return ops::mse_loss(v, t.constant(other)); }, {3, 4});
}

TEST_CASE("l1 loss gradient away from kinks") {
  SeededRng rng(10);
  Tensor target = rng.normal_tensor({3, 4});
  Tensor x = target;
  for (auto& v : x.data()) v += (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.1, 1.0);
  auto r = grad_check([&](Tape& t, Var v) { return ops::l1_loss(v, t.constant(target)); }, x, 1e-6, 1e-5);
  CHECK(r.passed);

  Tape t;
  Var p = t.variable(target);
  t.backward(ops::l1_loss(p, t.constant(target)));
  for (double g : t.grad(p).data()) CHECK(g == 0.0);
}

TEST_CASE("attention gradient and masking") {
  SeededRng rng(12);
  const std::size_t B = 2, F = 4, W = 6, H = 2;
  std::vector<unsigned char> allow(F * F);
  for (std::size_t f = 0; f < F; ++f)
    for (std::size_t g = 0; g < F; ++g) allow[f * F + g] = (f > g ? f - g : g - f) <= 1;
  Tensor k = rng.normal_tensor({B * F, W}), v = rng.normal_tensor({B * F, W}), q = rng.normal_tensor({B * F, W});
  check_unary("attention q", [&](Tape& t, Var x) { return ops::attention(x, t.constant(k), t.constant(v), allow, B, F, H); },
              {B * F, W});
  check_unary("attention k", [&](Tape& t, Var x) { return ops::attention(t.constant(q), x, t.constant(v), allow, B, F, H); },
              {B * F, W});
  check_unary("attention v", [&](Tape& t, Var x) { return ops::attention(t.constant(q), t.constant(k), x, allow, B, F, H); },
              {B * F, W});
  check_unary("attention shared", [&](Tape&, Var x) { return ops::attention(x, x, x, allow, B, F, H); }, {B * F, W});

  std::vector<unsigned char> bad(F * F, 1);
  for (std::size_t g = 0; g < F; ++g) bad[2 * F + g] = 0;
  Tape t;
  CHECK_THROWS_AS(ops::attention(t.constant(q), t.constant(k), t.constant(v), bad, B, F, H), DegenerateMaskError);
}

TEST_CASE("grad_check reports") {
  SeededRng rng(13);
  // Dyadic inputs and a power-of-two step make central differences exact.
  auto linear =
      grad_check([](Tape&, Var v) { return ops::sum(v); }, Tensor::vector({1, -2, 3, 0.5, 4}), 0x1.0p-20);
  CHECK(linear.max_rel_error == 0.0);

  Tensor w = rng.normal_tensor({1, 6});
  auto smooth = grad_check(
      [&](Tape& t, Var v) { return ops::sum(ops::mul(ops::softmax(v), t.constant(w))); }, rng.normal_tensor({1, 6}),
      1e-6, 1e-5);
  CHECK(smooth.passed);

  // Negative control: a square op whose backward forgets the factor of 2.
  auto broken = grad_check(
      [](Tape& t, Var v) {
        Tensor y = v.value();
        for (auto& e : y.data()) e = e * e;
        const int id = v.id();
        Var sq = t.record(std::move(y), {id},
                          [id](Tape& tp, const Tensor& g) {
                            auto& gb = tp.grad_buffer(id);
                            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * tp.value(id)[i];
                          },
                          "broken_square");
        return ops::sum(sq);
      },
      rng.normal_tensor({4}));
  CHECK_FALSE(broken.passed);
}

TEST_CASE("mlp parameters pass grad_check_params") {
  ParameterSet ps;
  SeededRng rng(14);
  auto mlp = Mlp::create(ps, "mlp", {3, 5, 2}, rng);
  auto mlp2 = Mlp::create(ps, "g", {3, 4, 2}, rng, Activation::kGelu);
  Tensor x = rng.normal_tensor({4, 3});
  Tensor y = rng.normal_tensor({4, 2});
  auto report = grad_check_params(
      [&](Tape& t) {
        return ops::add(ops::mse_loss(mlp.forward(t, t.constant(x)), t.constant(y)),
                        ops::mse_loss(mlp2.forward(t, t.constant(x)), t.constant(y)));
      },
      ps.all());
  CHECK(report.passed);
  CHECK(report.analytic.size() == ps.scalar_count());
}

TEST_CASE("adam reduces a quadratic") {
  ParameterSet ps;
  auto& p = ps.add("x", Tensor::vector({3.0, -2.0}));
  Adam opt(ps.all(), AdamConfig{.lr = 0.05});
  for (int i = 0; i < 500; ++i) {
    ps.zero_grad();
    Tape t;
    Var v = t.parameter(p);
    t.backward(ops::sum(ops::mul(v, v)));
    opt.step();
  }
  CHECK(std::abs(p.value[0]) < 0.05);
  CHECK(std::abs(p.value[1]) < 0.05);
}
