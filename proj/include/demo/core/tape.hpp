#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "demo/core/tensor.hpp"

namespace demo {

/// Trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}
  void zero_grad() { grad.fill(0.0); }
};

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Tape& tape() const;
  int id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Append-only record of executed ops for one forward graph. Parents always
/// precede their children, so a reverse sweep is a valid topological order.
/// A tape supports exactly one backward pass.
class Tape {
 public:
  /// Receives the upstream gradient of the node and pushes it to parents via
  /// Tape::accumulate.
  using BackwardFn = std::function<void(Tape&, const Tensor& upstream)>;

  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var variable(Tensor value);
  Var parameter(Parameter& p);

  /// Runs reverse-mode accumulation from a scalar loss. Parameter leaves add
  /// their total derivative into Parameter::grad.
  void backward(Var loss);

  const Tensor& grad(Var v) const;
  bool consumed() const noexcept { return consumed_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// When enabled every recorded value is checked for NaN/Inf.
  void set_debug_checks(bool on) noexcept { debug_checks_ = on; }

  // Op-author interface.
  Var record(Tensor value, std::vector<int> parents, BackwardFn fn, const char* op);
  const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  /// Gradient buffer of a node, allocated (zeroed) on first use.
  Tensor& grad_buffer(int id);
  void check_owner(const Var& v, const char* op) const;

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<int> parents;
    BackwardFn backward;
    Parameter* sink = nullptr;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
  bool consumed_ = false;
  bool debug_checks_;
};

}  // namespace demo
