#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace classic::cli {

struct GradCheckResult {
  std::string name;
  std::size_t trials = 0;
  double max_error = 0.0;
  bool passed = false;
};

/// Central-difference checks of every differentiable op, every loss, the
/// task attention view and a small masked model, each on `trials` random
/// instances (values in [-2, 2], dims <= 8).
std::vector<GradCheckResult> run_grad_suite(std::size_t trials, std::uint64_t seed, double tolerance = 1e-4);

}  // namespace classic::cli
