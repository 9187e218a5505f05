#include "demo/harness/gradient_suite.hpp"

#include <functional>

#include "demo/core/gradcheck.hpp"
#include "demo/core/ops.hpp"
#include "demo/core/rng.hpp"
#include "demo/disentangle/losses.hpp"
#include "demo/field/field_net.hpp"
#include "demo/flow/flow.hpp"

namespace demo::harness {

namespace {

constexpr double kLinearTol = 1e-6;
constexpr double kTol = 1e-4;

// Contracts an op's output with fixed random weights so every output
// coordinate reaches the scalar.
Var contract(Tape& t, Var y, std::uint64_t seed) {
  SeededRng rng(seed);
  return ops::sum(ops::mul(y, t.constant(rng.normal_tensor(y.shape()))));
}

GradCase from_report(std::string name, bool linear, const GradCheckReport& r) {
  return {std::move(name), linear, r.max_rel_error, r.tol, r.analytic.size(), r.passed};
}

struct Suite {
  std::vector<GradCase> cases;

  void unary(std::string name, bool linear, const std::function<Var(Tape&, Var)>& op, Shape shape,
             double spread = 1.0) {
    SeededRng rng(123);
    const Tensor x = rng.normal_tensor(shape, spread);
    const auto r = grad_check([&](Tape& t, Var v) { return contract(t, op(t, v), 99); }, x, 1e-6,
                              linear ? kLinearTol : kTol);
    cases.push_back(from_report(std::move(name), linear, r));
  }
  void scalar(std::string name, const std::function<Var(Tape&, Var)>& f, const Tensor& x) {
    cases.push_back(from_report(std::move(name), false, grad_check(f, x, 1e-6, kTol)));
  }
};

void micro_net(Suite& s, const std::string& name, std::size_t cond_dim, std::size_t context) {
  field::PredictorConfig c = field::micro_preset();
  c.cond_dim = cond_dim;
  c.context_frames = context;
  field::FieldNet net(c, 5);
  // Zero-initialized projections would hide most of the graph.
  SeededRng init(6);
  for (auto* p : net.params().all())
    for (auto& v : p->value.data()) v = 0.4 * init.normal();
  SeededRng rng(7);
  const std::size_t B = 2;
  field::FieldInput in;
  in.x = rng.normal_tensor({B * c.F, c.d});
  for (std::size_t b = 0; b < B; ++b) in.t.push_back(rng.uniform());
  if (cond_dim) in.cond = rng.normal_tensor({B * c.F, cond_dim});
  if (context) in.context = rng.normal_tensor({B, context * c.d});
  const Tensor w = rng.normal_tensor({B * c.F, c.d});
  const auto rp = grad_check_params(
      [&](Tape& t) { return ops::sum(ops::mul(net.forward(t, in), t.constant(w))); }, net.params().all(), 1e-6, kTol);
  s.cases.push_back(from_report(name + " params", false, rp));
  const auto rx = grad_check(
      [&](Tape& t, Var x) { return ops::sum(ops::mul(net.forward(t, x, in), t.constant(w))); }, in.x, 1e-6, kTol);
  s.cases.push_back(from_report(name + " input", false, rx));
}

}  // namespace

std::vector<GradCase> run_gradient_suite() {
  Suite s;
  SeededRng rng(8);
  const Tensor other = rng.normal_tensor({3, 4}), row = rng.normal_tensor({1, 4}), b53 = rng.normal_tensor({5, 3}),
               a35 = rng.normal_tensor({3, 5});

  s.unary("matmul lhs", true, [&](Tape& t, Var v) { return ops::matmul(v, t.constant(b53)); }, {4, 5});
  s.unary("matmul rhs", true, [&](Tape& t, Var v) { return ops::matmul(t.constant(a35), v); }, {5, 3});
  s.unary("matmul_nt lhs", true, [&](Tape& t, Var v) { return ops::matmul_nt(v, t.constant(a35)); }, {4, 5});
  s.unary("matmul_nt rhs", true, [&](Tape& t, Var v) { return ops::matmul_nt(t.constant(a35), v); }, {4, 5});
  s.unary("add", true, [&](Tape& t, Var v) { return ops::add(v, t.constant(other)); }, {3, 4});
  s.unary("sub", true, [&](Tape& t, Var v) { return ops::sub(t.constant(other), v); }, {3, 4});
  s.unary("scale", true, [](Tape&, Var v) { return ops::scale(v, -2.5); }, {3, 4});
  s.unary("add_row", true, [&](Tape& t, Var v) { return ops::add_row(t.constant(other), v); }, {1, 4});
  s.unary("repeat_rows", true, [](Tape&, Var v) { return ops::repeat_rows(v, 3); }, {2, 4});
  s.unary("slice_cols", true, [](Tape&, Var v) { return ops::slice_cols(v, 1, 2); }, {3, 4});
  s.unary("concat_cols", true, [&](Tape& t, Var v) { return ops::concat_cols({t.constant(other), v, v}); }, {3, 2});
  s.unary("frame_diff", true, [](Tape&, Var v) { return ops::frame_diff(v, 2, 3); }, {6, 4});
  s.unary("sum", true, [](Tape&, Var v) { return ops::sum(v); }, {3, 4});
  s.unary("mean", true, [](Tape&, Var v) { return ops::mean(v); }, {3, 4});

  s.unary("mul", false, [&](Tape& t, Var v) { return ops::mul(v, t.constant(other)); }, {3, 4});
  s.unary("mul self", false, [](Tape&, Var v) { return ops::mul(v, v); }, {3, 4});
  s.unary("mul_row lhs", false, [&](Tape& t, Var v) { return ops::mul_row(v, t.constant(row)); }, {3, 4});
  s.unary("mul_row rhs", false, [&](Tape& t, Var v) { return ops::mul_row(t.constant(other), v); }, {1, 4});
  s.unary("tanh", false, [](Tape&, Var v) { return ops::tanh(v); }, {3, 4});
  s.unary("gelu", false, [](Tape&, Var v) { return ops::gelu(v); }, {3, 4}, 2.0);
  s.unary("exp", false, [](Tape&, Var v) { return ops::exp(v); }, {3, 4});
  s.unary("layer_norm", false, [](Tape&, Var v) { return ops::layer_norm(v, 1e-5); }, {3, 6});
  s.unary("softmax", false, [](Tape&, Var v) { return ops::softmax(v); }, {3, 5});
  static const unsigned char mask[] = {1, 0, 1, 1, 1, 1, 0, 0, 1};
  s.unary("softmax masked", false, [](Tape&, Var v) { return ops::softmax(v, mask); }, {3, 3});
  s.unary("normalize_rows", false, [](Tape&, Var v) { return ops::normalize_rows(v); }, {3, 4});
  s.unary("row_dot", false, [&](Tape& t, Var v) { return ops::row_dot(v, t.constant(other)); }, {3, 4});
  static const std::size_t targets[] = {0, 3, 1};
  s.unary("cross_entropy_rows", false, [](Tape&, Var v) { return ops::cross_entropy_rows(v, targets); }, {3, 4});
  s.unary("mse_loss", false, [&](Tape& t, Var v) { return ops::mse_loss(v, t.constant(other)); }, {3, 4});
  {
    // l1 is checked away from its kinks.
    Tensor x = other;
    for (auto& v : x.data()) v += (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.1, 1.0);
    s.scalar("l1_loss", [&](Tape& t, Var v) { return ops::l1_loss(v, t.constant(other)); }, x);
  }
  {
    const std::size_t B = 2, F = 4, W = 6, H = 2;
    std::vector<unsigned char> allow(F * F);
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t g = 0; g < F; ++g) allow[f * F + g] = (f > g ? f - g : g - f) <= 1;
    const Tensor q = rng.normal_tensor({B * F, W}), k = rng.normal_tensor({B * F, W}), v = rng.normal_tensor({B * F, W});
    s.unary("attention q", false,
            [&](Tape& t, Var x) { return ops::attention(x, t.constant(k), t.constant(v), allow, B, F, H); }, {B * F, W});
    s.unary("attention k", false,
            [&](Tape& t, Var x) { return ops::attention(t.constant(q), x, t.constant(v), allow, B, F, H); }, {B * F, W});
    s.unary("attention v", false,
            [&](Tape& t, Var x) { return ops::attention(t.constant(q), t.constant(k), x, allow, B, F, H); }, {B * F, W});
  }
  {
    const Tensor x = rng.normal_tensor({3, 4});
    s.unary("frame_adaln", false,
            [&](Tape& t, Var v) {
              return field::frame_adaln(t.constant(x), ops::slice_cols(v, 0, 4), ops::slice_cols(v, 4, 4));
            },
            {3, 8});
    s.unary("gate", false, [&](Tape& t, Var v) { return field::gate(t.constant(x), v); }, {3, 4});
  }

  // Training losses.
  {
    const Tensor u = rng.normal_tensor({6, 3});
    Tensor x = u;
    for (auto& v : x.data()) v += (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.2, 1.0);
    s.scalar("cfm_loss", [&](Tape&, Var v) { return flow::cfm_loss(v, u); }, x);
    s.scalar("velocity_consistency_loss",
             [&](Tape&, Var v) { return flow::velocity_consistency_loss(v, u, 2, 3).loss; }, x);
  }
  {
    const Tensor f2 = rng.normal_tensor({4, 5}), fa = rng.normal_tensor({4, 5});
    s.scalar("eye_contrastive_loss",
             [&](Tape& t, Var v) { return disentangle::eye_contrastive_loss(v, t.constant(f2), t.constant(fa), 0.5); },
             rng.normal_tensor({4, 5}));
    const Tensor keys = rng.normal_tensor({4, 5});
    s.scalar("infonce", [&](Tape& t, Var v) { return disentangle::infonce(v, t.constant(keys), 0.7); },
             rng.normal_tensor({4, 5}));
  }

  micro_net(s, "micro field net", 0, 0);
  micro_net(s, "micro field net (cond, context)", 2, 1);
  return s.cases;
}

}  // namespace demo::harness
