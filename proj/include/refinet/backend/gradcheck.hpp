#pragma once

// Central finite-difference verification of every differentiable op.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "refinet/backend/tensor.hpp"

namespace refinet {

struct GradCheckOptions {
  std::uint64_t seed = 0;
  std::size_t trials = 20;
  double step_f32 = 1e-3;
  double step_f64 = 1e-5;
  double tolerance_f32 = 1e-2;
  double tolerance_f64 = 1e-4;
  // Test hook: scale the analytic gradient of this op by 1.1 (negative control).
  std::string perturb_op;
};

struct GradCheckResult {
  std::string op;
  std::size_t trials = 0;
  double max_rel_error_f32 = 0.0;
  double max_rel_error_f64 = 0.0;
  bool passed = false;
};

/// Relative error ||a - b||_2 / max(||a||_2, ||b||_2, 1e-12).
double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric);

/// Compare backward() with central differences for a scalar function of the
/// given leaves. The leaves' gradients are cleared and overwritten.
template <typename T>
double check_gradient(const std::function<BasicTensor<T>(const std::vector<BasicTensor<T>>&)>& f,
                      std::vector<BasicTensor<T>>& leaves, double step, double analytic_scale = 1.0);

/// Run the whole op suite in both precisions.
std::vector<GradCheckResult> run_gradcheck(const GradCheckOptions& options);

}  // namespace refinet
