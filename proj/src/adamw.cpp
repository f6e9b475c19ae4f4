#include "chunklab/adamw.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace chunklab {

template <class Real>
void AdamW<Real>::step(std::span<DenseArray<Real>> params,
                       std::span<const std::vector<Real>> grads) {
  if (params.size() != grads.size())
    throw std::invalid_argument("adamw: params/grads count mismatch");
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.size(), Real(0));
      v_.emplace_back(p.size(), Real(0));
    }
  }
  if (m_.size() != params.size()) throw std::invalid_argument("adamw: parameter count changed");
  for (std::size_t k = 0; k < params.size(); ++k)
    if (grads[k].size() != params[k].size() || m_[k].size() != params[k].size())
      throw std::invalid_argument("adamw: shape mismatch for parameter " + std::to_string(k));

  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  const Real b1 = static_cast<Real>(cfg_.beta1), b2 = static_cast<Real>(cfg_.beta2);
  const Real decay = static_cast<Real>(1.0 - cfg_.lr * cfg_.weight_decay);
  const Real step_size = static_cast<Real>(cfg_.lr / bc1);
  const Real inv_sqrt_bc2 = static_cast<Real>(1.0 / std::sqrt(bc2));
  const Real eps = static_cast<Real>(cfg_.eps);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k].data;
    auto& m = m_[k];
    auto& v = v_[k];
    const auto& g = grads[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (Real(1) - b1) * g[i];
      v[i] = b2 * v[i] + (Real(1) - b2) * g[i] * g[i];
      p[i] *= decay;
      p[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_bc2 + eps);
    }
  }
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace chunklab
