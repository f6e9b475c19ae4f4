#pragma once

#include <functional>
#include <string>
#include <vector>

#include "chunklab/tensor.hpp"

namespace chunklab::verify {

struct GradCheckResult {
  double max_rel_error = 0;
  double max_abs_error = 0;
  double norm_rel_error = 0;  // ||a - n|| / max(||a||, ||n||) over all entries
  std::size_t checked = 0;
  std::string worst;  // "input[k][i]: analytic vs numeric"
};

// Builds a scalar loss on a fresh tape from the given inputs (all recorded as
// requires-grad leaves, in order).
using LossBuilder =
    std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>;

// Central differences with step h against one reverse pass. The relative
// error of each entry is |a - n| / max(|a|, |n|, floor * max_j |n_j|), so
// entries far below the gradient's own scale are judged on that scale.
GradCheckResult gradcheck(const LossBuilder& build, const std::vector<DenseArray<double>>& inputs,
                          double h = 1e-3, double floor = 1e-3);

}  // namespace chunklab::verify
