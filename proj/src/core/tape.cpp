#include "demo/core/tape.hpp"

#include "demo/core/error.hpp"

namespace demo {

const Tensor& Var::value() const {
  if (!tape_) throw TapeError("use of an unbound Var");
  return tape_->value(id_);
}

Tape& Var::tape() const {
  if (!tape_) throw TapeError("use of an unbound Var");
  return *tape_;
}

Tape::Tape() {
#ifdef NDEBUG
  debug_checks_ = false;
#else
  debug_checks_ = true;
#endif
}

Var Tape::constant(Tensor value) {
  if (consumed_) throw TapeError("tape already consumed by backward()");
  nodes_.push_back(Node{std::move(value), {}, {}, {}, nullptr, false});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::variable(Tensor value) {
  if (consumed_) throw TapeError("tape already consumed by backward()");
  nodes_.push_back(Node{std::move(value), {}, {}, {}, nullptr, true});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::parameter(Parameter& p) {
  if (consumed_) throw TapeError("tape already consumed by backward()");
  nodes_.push_back(Node{p.value, {}, {}, {}, &p, true});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::record(Tensor value, std::vector<int> parents, BackwardFn fn, const char* op) {
  if (consumed_) throw TapeError("tape already consumed by backward()");
  if (debug_checks_ && !value.all_finite()) throw NonFiniteError(std::string(op) + ": produced a non-finite value");
  bool needs = false;
  for (int p : parents) needs = needs || nodes_[static_cast<std::size_t>(p)].needs_grad;
  nodes_.push_back(Node{std::move(value), {}, std::move(parents), needs ? std::move(fn) : BackwardFn{}, nullptr,
                        needs});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Tensor& Tape::grad_buffer(int id) {
  auto& node = nodes_[static_cast<std::size_t>(id)];
  if (node.grad.empty()) node.grad = Tensor(node.value.shape());
  return node.grad;
}

const Tensor& Tape::grad(Var v) const {
  check_owner(v, "grad");
  const auto& node = nodes_[static_cast<std::size_t>(v.id())];
  if (node.grad.empty()) throw TapeError("no gradient recorded for this value");
  return node.grad;
}

void Tape::check_owner(const Var& v, const char* op) const {
  if (!v.valid() || &v.tape() != this) throw TapeError(std::string(op) + ": Var belongs to a different tape");
}

void Tape::backward(Var loss) {
  check_owner(loss, "backward");
  if (consumed_) throw TapeError("backward() called twice on one tape");
  if (loss.value().size() != 1) throw TapeError("backward() needs a scalar loss, got " + shape_str(loss.shape()));
  consumed_ = true;
  grad_buffer(loss.id()).fill(1.0);
  for (int i = loss.id(); i >= 0; --i) {
    auto& node = nodes_[static_cast<std::size_t>(i)];
    if (!node.needs_grad || node.grad.empty()) continue;
    if (node.backward) node.backward(*this, node.grad);
    if (node.sink) {
      auto& g = node.sink->grad;
      for (std::size_t j = 0; j < g.size(); ++j) g[j] += node.grad[j];
    }
  }
}

}  // namespace demo
