#pragma once

#include "chunklab/chunker.hpp"
#include "chunklab/tensor.hpp"

namespace chunklab {

template <class Real>
struct ExpandedStates {
  Var<Real> xk;  // plain repetition of chunk rows
  Var<Real> xb;  // smoothed expansion
};

// EMA over the K chunk rows using the confidence at each chunk start, then
// repetition to length T.
template <class Real>
ExpandedStates<Real> chunk_smooth_expand(Var<Real> y, const BoundaryMask& b, Var<Real> c);

// Repetition to length T first, then EMA with every position's confidence.
template <class Real>
ExpandedStates<Real> byte_smooth_expand(Var<Real> y, const BoundaryMask& b, Var<Real> c);

template <class Real>
Var<Real> fuse_residual(Var<Real> xE, Var<Real> xB);

// xE + ste_one(c) * xB: same forward value as fuse_residual, with an extra
// gradient path <dL/dout_i, xB_i> into c_i.
template <class Real>
Var<Real> fuse_confidence_ste(Var<Real> xE, Var<Real> xB, Var<Real> c);

}  // namespace chunklab
