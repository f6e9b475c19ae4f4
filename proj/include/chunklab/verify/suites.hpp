#pragma once

#include <string>
#include <vector>

namespace chunklab::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Every differentiable op, >= 10 random 64-bit instances each, central
// differences with h = 1e-3. Judged on the norm-wise relative error.
std::vector<CheckResult> op_gradient_suite(std::size_t instances = 10, double tol = 1e-4);

// The whole training forward (T = 32, d <= 8) for every chunker x smoothing x
// fusion combination that has a true gradient, with the mask frozen.
std::vector<CheckResult> composite_gradient_suite(std::size_t instances = 10,
                                                  double tol = 1e-4);

// Closed-form metric values.
std::vector<CheckResult> metric_closed_form_suite();

// Rotation null: exact vs Monte Carlo, calibration under rotation, and the
// runs z Monte Carlo. `scale` shrinks trial counts for quick runs (1 = full).
std::vector<CheckResult> null_calibration_suite(double scale = 1.0);

std::vector<CheckResult> ratio_loss_suite();
std::vector<CheckResult> cab_loss_suite();
std::vector<CheckResult> oracle_reconstruction_suite();

}  // namespace chunklab::verify
