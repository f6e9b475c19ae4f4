#include "chunklab/expansion.hpp"

#include <stdexcept>

namespace chunklab {

namespace {

template <class Real>
void check_triple(Var<Real> y, const BoundaryMask& b, Var<Real> c) {
  if (b.count() == 0) throw std::invalid_argument("expansion: no chunks");
  if (y.value().rows() != b.count())
    throw std::invalid_argument("expansion: chunk rows do not match boundary count");
  if (c.value().size() != b.size())
    throw std::invalid_argument("expansion: confidence length does not match mask");
}

}  // namespace

template <class Real>
ExpandedStates<Real> chunk_smooth_expand(Var<Real> y, const BoundaryMask& b, Var<Real> c) {
  check_triple(y, b, c);
  const std::size_t T = b.size(), K = b.count();
  auto c_at_starts = reshape(select_rows(reshape(c, {T, 1}), b.bits()), {K});
  auto smoothed = ema_scan(y, c_at_starts);
  return {repeat_rows(y, b.bits()), repeat_rows(smoothed, b.bits())};
}

template <class Real>
ExpandedStates<Real> byte_smooth_expand(Var<Real> y, const BoundaryMask& b, Var<Real> c) {
  check_triple(y, b, c);
  auto xk = repeat_rows(y, b.bits());
  return {xk, ema_scan(xk, reshape(c, {b.size()}))};
}

template <class Real>
Var<Real> fuse_residual(Var<Real> xE, Var<Real> xB) {
  return add(xE, xB);
}

template <class Real>
Var<Real> fuse_confidence_ste(Var<Real> xE, Var<Real> xB, Var<Real> c) {
  if (c.value().size() != xB.value().rows())
    throw std::invalid_argument("fuse_confidence_ste: confidence length mismatch");
  return add(xE, scale_rows(xB, ste_one(c)));
}

#define CHUNKLAB_INSTANTIATE(R)                                                      \
  template ExpandedStates<R> chunk_smooth_expand(Var<R>, const BoundaryMask&, Var<R>); \
  template ExpandedStates<R> byte_smooth_expand(Var<R>, const BoundaryMask&, Var<R>);  \
  template Var<R> fuse_residual(Var<R>, Var<R>);                                     \
  template Var<R> fuse_confidence_ste(Var<R>, Var<R>, Var<R>);

CHUNKLAB_INSTANTIATE(float)
CHUNKLAB_INSTANTIATE(double)

#undef CHUNKLAB_INSTANTIATE

}  // namespace chunklab
