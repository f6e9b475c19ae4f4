#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "chunklab/tensor.hpp"

namespace chunklab {

// Realised boundary indicators b. Always b[0] = 1, so K >= 1.
class BoundaryMask {
 public:
  BoundaryMask() = default;
  explicit BoundaryMask(std::vector<std::uint8_t> bits);

  std::size_t size() const { return bits_.size(); }
  std::size_t count() const { return count_; }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  std::span<const std::uint8_t> bits() const { return bits_; }
  // 0-based start index of each chunk.
  std::vector<std::size_t> positions() const;
  double compression() const { return static_cast<double>(size()) / static_cast<double>(count_); }

  bool operator==(const BoundaryMask&) const = default;

 private:
  std::vector<std::uint8_t> bits_;
  std::size_t count_ = 0;
};

template <class Real>
struct CosineChunkerParams {
  Var<Real> w_q;  // [d_h x d_h]
  Var<Real> w_k;  // [d_h x d_h]
};

template <class Real>
struct SigmoidChunkerParams {
  Var<Real> w;     // [d_h x 1]
  Var<Real> bias;  // [1]
};

inline constexpr double kCosineNormEps = 1e-8;

// p_i = (1 - cos(q_i, k_{i-1})) / 2 with q = xE W_q, k = xE W_k and p_1 = 1.
template <class Real>
Var<Real> cosine_scores(Var<Real> xE, const CosineChunkerParams<Real>& params);

// p_i = sigmoid(w . xE_i + bias), p_1 = 1.
template <class Real>
Var<Real> sigmoid_scores(Var<Real> xE, const SigmoidChunkerParams<Real>& params);

// The cosine head on already-projected queries/keys. Exposed for tests.
template <class Real>
Var<Real> adjacent_cosine_scores(Var<Real> q, Var<Real> k);

// b_i = 1 iff p_i > 0.5. Requires p_1 = 1.
template <class Real>
BoundaryMask threshold_boundaries(std::span<const Real> p);

// c_i = max(p_i, 1 - p_i). At p = 0.5 the gradient follows the p branch.
template <class Real>
Var<Real> confidences(Var<Real> p);

// Boundary at every C-th position starting with the first.
BoundaryMask equal_size_boundaries(std::size_t T, std::size_t C);

// Promotes the highest-scoring non-boundaries (ties to the lower index) until
// K >= ceil(T / c_max). Caps compression at c_max.
template <class Real>
BoundaryMask enforce_min_boundaries(std::span<const Real> p, const BoundaryMask& b, double c_max);

std::size_t min_boundary_count(std::size_t T, double c_max);

}  // namespace chunklab
