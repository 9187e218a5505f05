#pragma once

#include <string>
#include <vector>

namespace demo::harness {

struct GradCase {
  std::string name;
  bool linear = false;  ///< linear ops are held to 1e-6, the rest to 1e-4
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t coordinates = 0;
  bool passed = false;
};

/// Autodiff against central differences for every differentiable op, the
/// training losses and the micro field net (plain, and with condition and
/// context inputs).
std::vector<GradCase> run_gradient_suite();

}  // namespace demo::harness
