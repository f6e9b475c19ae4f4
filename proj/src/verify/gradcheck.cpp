#include "chunklab/verify/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace chunklab::verify {

namespace {

double evaluate(const LossBuilder& build, const std::vector<DenseArray<double>>& inputs) {
  Tape<double> tape;
  std::vector<Var<double>> leaves;
  for (const auto& in : inputs) leaves.push_back(tape.leaf(in, false));
  return build(tape, leaves).item();
}

}  // namespace

GradCheckResult gradcheck(const LossBuilder& build, const std::vector<DenseArray<double>>& inputs,
                          double h, double floor) {
  std::vector<std::vector<double>> analytic;
  {
    Tape<double> tape;
    std::vector<Var<double>> leaves;
    for (const auto& in : inputs) leaves.push_back(tape.leaf(in, true));
    auto loss = build(tape, leaves);
    tape.backward(loss);
    for (const auto& l : leaves) {
      auto g = l.grad();
      analytic.emplace_back(g.begin(), g.end());
      if (analytic.back().empty()) analytic.back().assign(l.value().size(), 0.0);
    }
  }

  std::vector<std::vector<double>> numeric(inputs.size());
  auto probe = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    numeric[k].resize(inputs[k].size());
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double x0 = inputs[k].data[i];
      probe[k].data[i] = x0 + h;
      const double up = evaluate(build, probe);
      probe[k].data[i] = x0 - h;
      const double down = evaluate(build, probe);
      probe[k].data[i] = x0;
      numeric[k][i] = (up - down) / (2 * h);
    }
  }

  double scale = 0;
  for (const auto& n : numeric)
    for (double v : n) scale = std::max(scale, std::abs(v));
  const double denom_floor = std::max(floor * scale, 1e-12);

  GradCheckResult r;
  double diff2 = 0, a2 = 0, n2 = 0;
  for (std::size_t k = 0; k < inputs.size(); ++k)
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double a = analytic[k][i], n = numeric[k][i];
      const double abs_err = std::abs(a - n);
      const double rel = abs_err / std::max({std::abs(a), std::abs(n), denom_floor});
      ++r.checked;
      diff2 += (a - n) * (a - n);
      a2 += a * a;
      n2 += n * n;
      r.max_abs_error = std::max(r.max_abs_error, abs_err);
      if (rel > r.max_rel_error || r.worst.empty()) {
        if (rel >= r.max_rel_error) {
          std::ostringstream os;
          os << "input[" << k << "][" << i << "]: analytic " << a << " vs numeric " << n;
          r.worst = os.str();
        }
        r.max_rel_error = std::max(r.max_rel_error, rel);
      }
    }
  const double norm = std::sqrt(std::max(a2, n2));
  r.norm_rel_error = norm > 0 ? std::sqrt(diff2) / norm : std::sqrt(diff2);
  return r;
}

}  // namespace chunklab::verify
