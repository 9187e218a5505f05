#pragma once

#include <vector>

#include "demo/core/tape.hpp"

namespace demo {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Reads Parameter::grad and leaves it untouched;
/// callers zero gradients between steps.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig config);

  void step();
  std::size_t steps() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return config_; }
  void set_lr(double lr) noexcept { config_.lr = lr; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Tensor> m_, v_;
  AdamConfig config_;
  std::size_t t_ = 0;
};

}  // namespace demo
