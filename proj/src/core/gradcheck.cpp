#include "demo/core/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace demo {

namespace {

void finish(GradCheckReport& r, double tol, double floor) {
  r.tol = tol;
  r.rel_error.resize(r.analytic.size());
  for (std::size_t i = 0; i < r.analytic.size(); ++i) {
    const double a = r.analytic[i], n = r.numeric[i];
    const double denom = std::max({std::abs(a), std::abs(n), floor});
    r.rel_error[i] = std::abs(a - n) / denom;
    if (r.rel_error[i] > r.max_rel_error) {
      r.max_rel_error = r.rel_error[i];
      r.worst_index = i;
    }
  }
  r.passed = r.max_rel_error < tol;
}

}  // namespace

GradCheckReport grad_check(const ScalarFn& f, const Tensor& x, double h, double tol, double floor) {
  GradCheckReport r;
  {
    Tape tape;
    Var xv = tape.variable(x);
    Var loss = f(tape, xv);
    tape.backward(loss);
    const Tensor& g = tape.grad(xv);
    r.analytic.assign(g.data().begin(), g.data().end());
  }
  auto eval = [&](const Tensor& at) {
    Tape tape;
    return f(tape, tape.constant(at)).value().item();
  };
  Tensor probe = x;
  r.numeric.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double fp = eval(probe);
    probe[i] = orig - h;
    const double fm = eval(probe);
    probe[i] = orig;
    r.numeric[i] = (fp - fm) / (2.0 * h);
  }
  finish(r, tol, floor);
  return r;
}

GradCheckReport grad_check_params(const std::function<Var(Tape&)>& loss, const std::vector<Parameter*>& params,
                                  double h, double tol, double floor) {
  GradCheckReport r;
  for (auto* p : params) p->zero_grad();
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  for (auto* p : params) r.analytic.insert(r.analytic.end(), p->grad.data().begin(), p->grad.data().end());
  auto eval = [&] {
    Tape tape;
    return loss(tape).value().item();
  };
  for (auto* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double orig = p->value[i];
      p->value[i] = orig + h;
      const double fp = eval();
      p->value[i] = orig - h;
      const double fm = eval();
      p->value[i] = orig;
      r.numeric.push_back((fp - fm) / (2.0 * h));
    }
  }
  for (auto* p : params) p->zero_grad();
  finish(r, tol, floor);
  return r;
}

}  // namespace demo
