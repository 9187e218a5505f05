#pragma once

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "demo/core/ops.hpp"
#include "demo/core/rng.hpp"

namespace demo {

/// Owning, ordered collection of named parameters. Order is insertion order
/// and is what checkpoints and optimizers iterate over.
class ParameterSet {
 public:
  Parameter& add(std::string name, Tensor init);
  Parameter& get(std::string_view name);
  const Parameter& get(std::string_view name) const;
  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::size_t size() const noexcept { return params_.size(); }
  std::size_t scalar_count() const;
  void zero_grad();

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

enum class Init { kNormalFanIn, kZero };

/// y = x W + b with W: in x out, b: 1 x out.
struct Linear {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;
  std::size_t in = 0;
  std::size_t out = 0;

  static Linear create(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t out, SeededRng& rng,
                       Init init = Init::kNormalFanIn);
  static Linear bind(ParameterSet& ps, const std::string& name);
  Var forward(Tape& tape, Var x) const;
};

enum class Activation { kTanh, kGelu };

/// Fully connected stack; the activation is applied between layers only.
struct Mlp {
  std::vector<Linear> layers;
  Activation act = Activation::kTanh;

  static Mlp create(ParameterSet& ps, const std::string& name, const std::vector<std::size_t>& widths,
                    SeededRng& rng, Activation act = Activation::kTanh);
  Var forward(Tape& tape, Var x) const;
  std::size_t in() const { return layers.front().in; }
  std::size_t out() const { return layers.back().out; }
};

/// Evaluates a frozen network on plain tensors.
Tensor infer(const std::function<Var(Tape&, Var)>& net, const Tensor& x);

}  // namespace demo
