#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "chunklab/tensor.hpp"

namespace chunklab {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Decoupled weight decay with bias-corrected moments.
template <class Real>
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  // Moments are created lazily on the first step and must keep their shapes.
  void step(std::span<DenseArray<Real>> params, std::span<const std::vector<Real>> grads);

  const AdamWConfig& config() const { return cfg_; }
  AdamWConfig& config() { return cfg_; }
  std::uint64_t steps() const { return step_; }
  const std::vector<std::vector<Real>>& first_moment() const { return m_; }
  const std::vector<std::vector<Real>>& second_moment() const { return v_; }

 private:
  AdamWConfig cfg_;
  std::uint64_t step_ = 0;
  std::vector<std::vector<Real>> m_;
  std::vector<std::vector<Real>> v_;
};

}  // namespace chunklab
