#include "demo/core/nn.hpp"

#include <cmath>

#include "demo/core/error.hpp"

namespace demo {

Parameter& ParameterSet::add(std::string name, Tensor init) {
  if (find(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  params_.push_back(std::make_unique<Parameter>(std::move(name), std::move(init)));
  return *params_.back();
}

Parameter* ParameterSet::find(std::string_view name) {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

const Parameter* ParameterSet::find(std::string_view name) const {
  for (const auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

Parameter& ParameterSet::get(std::string_view name) {
  auto* p = find(name);
  if (!p) throw ConfigError("unknown parameter '" + std::string(name) + "'");
  return *p;
}

const Parameter& ParameterSet::get(std::string_view name) const {
  const auto* p = find(name);
  if (!p) throw ConfigError("unknown parameter '" + std::string(name) + "'");
  return *p;
}

std::vector<Parameter*> ParameterSet::all() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterSet::all() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

Linear Linear::create(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t out, SeededRng& rng,
                      Init init) {
  Tensor w({in, out});
  if (init == Init::kNormalFanIn) {
    const double sd = 1.0 / std::sqrt(static_cast<double>(in));
    for (auto& v : w.data()) v = sd * rng.normal();
  }
  Linear l;
  l.weight = &ps.add(name + ".weight", std::move(w));
  l.bias = &ps.add(name + ".bias", Tensor({1, out}));
  l.in = in;
  l.out = out;
  return l;
}

Linear Linear::bind(ParameterSet& ps, const std::string& name) {
  Linear l;
  l.weight = &ps.get(name + ".weight");
  l.bias = &ps.get(name + ".bias");
  l.in = l.weight->value.rows();
  l.out = l.weight->value.cols();
  return l;
}

Var Linear::forward(Tape& tape, Var x) const {
  if (x.cols() != in) {
    throw DimensionError("linear '" + weight->name + "': expected " + std::to_string(in) + " input columns, got " +
                         std::to_string(x.cols()));
  }
  return ops::add_row(ops::matmul(x, tape.parameter(*weight)), tape.parameter(*bias));
}

Mlp Mlp::create(ParameterSet& ps, const std::string& name, const std::vector<std::size_t>& widths, SeededRng& rng,
                Activation act) {
  if (widths.size() < 2) throw ConfigError("mlp '" + name + "' needs at least input and output widths");
  Mlp m;
  m.act = act;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i)
    m.layers.push_back(Linear::create(ps, name + "." + std::to_string(i), widths[i], widths[i + 1], rng));
  return m;
}

Var Mlp::forward(Tape& tape, Var x) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = layers[i].forward(tape, x);
    if (i + 1 < layers.size()) x = act == Activation::kTanh ? ops::tanh(x) : ops::gelu(x);
  }
  return x;
}

Tensor infer(const std::function<Var(Tape&, Var)>& net, const Tensor& x) {
  Tape tape;
  return net(tape, tape.constant(x)).value();
}

}  // namespace demo
