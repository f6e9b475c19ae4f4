#pragma once

#include <optional>

#include "chunklab/chunker.hpp"
#include "chunklab/tensor.hpp"

namespace chunklab {

struct RatioLossConfig {
  double target = 4.0;  // N = C_tar, must be > 1
  double weight = 1.0;
};

struct CabLossConfig {
  double weight = 0.01;
  double clamp_eps = 1e-6;
};

struct LossWeights {
  double mse = 1.0;
  double ratio = 1.0;
  double cab = 0.0;
};

// N/(N-1) * ((N-1) F G + (1-F)(1-G)), F = realised boundary rate (constant),
// G = mean soft score (carries the gradient).
template <class Real>
Var<Real> ratio_loss(Var<Real> p, const BoundaryMask& b, double target);

// Closed form of the ratio loss for given F and G. Used for analysis.
double ratio_loss_value(double F, double G, double target);

// Per-position (1 - sg[P_{t+1}] - p_t)^2 with both terms clamped to
// [eps, 1 - eps]. P_next[t] is the probability of the target predicted from
// position t; the final position has no target and is dropped, so the result
// has T - 1 entries.
template <class Real>
Var<Real> cab_loss_terms(Var<Real> p, Var<Real> P_next, double clamp_eps = 1e-6);

// Mean of cab_loss_terms.
template <class Real>
Var<Real> cab_loss(Var<Real> p, Var<Real> P_next, double clamp_eps = 1e-6);

// w_mse * mse + w_ratio * ratio (+ w_cab * cab when present).
template <class Real>
Var<Real> total_loss(Var<Real> mse, Var<Real> ratio, std::optional<Var<Real>> cab,
                     const LossWeights& weights);

}  // namespace chunklab
