#include "chunklab/losses.hpp"

#include <stdexcept>

namespace chunklab {

double ratio_loss_value(double F, double G, double target) {
  if (!(target > 1.0)) throw std::invalid_argument("ratio loss target must be > 1");
  const double N = target;
  return N / (N - 1.0) * ((N - 1.0) * F * G + (1.0 - F) * (1.0 - G));
}

template <class Real>
Var<Real> ratio_loss(Var<Real> p, const BoundaryMask& b, double target) {
  if (!(target > 1.0)) throw std::invalid_argument("ratio loss target must be > 1");
  if (p.value().size() != b.size()) throw std::invalid_argument("ratio_loss: length mismatch");
  const double N = target;
  const double F = static_cast<double>(b.count()) / static_cast<double>(b.size());
  // Affine in G: slope * G + offset.
  const double slope = N / (N - 1.0) * ((N - 1.0) * F - (1.0 - F));
  const double offset = N / (N - 1.0) * (1.0 - F);
  return affine(mean(p), static_cast<Real>(slope), static_cast<Real>(offset));
}

template <class Real>
Var<Real> cab_loss_terms(Var<Real> p, Var<Real> P_next, double clamp_eps) {
  if (!(clamp_eps > 0.0 && clamp_eps < 0.5))
    throw std::invalid_argument("cab_loss: clamp_eps must be in (0, 0.5)");
  if (p.value().size() != P_next.value().size())
    throw std::invalid_argument("cab_loss: p and P_next lengths differ");
  const std::size_t T = p.value().size();
  if (T < 2) throw std::invalid_argument("cab_loss: need at least two positions");
  const Real lo = static_cast<Real>(clamp_eps), hi = static_cast<Real>(1.0 - clamp_eps);
  auto pc = clamp(slice_rows(reshape(p, {T}), 0, T - 1), lo, hi);
  auto Pc = clamp(stop_gradient(slice_rows(reshape(P_next, {T}), 0, T - 1)), lo, hi);
  auto residual = affine(add(pc, Pc), Real(-1), Real(1));
  return mul(residual, residual);
}

template <class Real>
Var<Real> cab_loss(Var<Real> p, Var<Real> P_next, double clamp_eps) {
  return mean(cab_loss_terms(p, P_next, clamp_eps));
}

template <class Real>
Var<Real> total_loss(Var<Real> mse_term, Var<Real> ratio, std::optional<Var<Real>> cab,
                     const LossWeights& w) {
  if (w.mse < 0 || w.ratio < 0 || w.cab < 0)
    throw std::invalid_argument("loss weights must be non-negative");
  auto total = add(affine(mse_term, static_cast<Real>(w.mse), Real(0)),
                   affine(ratio, static_cast<Real>(w.ratio), Real(0)));
  if (cab) total = add(total, affine(*cab, static_cast<Real>(w.cab), Real(0)));
  return total;
}

#define CHUNKLAB_INSTANTIATE(R)                                                          \
  template Var<R> ratio_loss(Var<R>, const BoundaryMask&, double);                      \
  template Var<R> cab_loss_terms(Var<R>, Var<R>, double);                               \
  template Var<R> cab_loss(Var<R>, Var<R>, double);                                     \
  template Var<R> total_loss(Var<R>, Var<R>, std::optional<Var<R>>, const LossWeights&);

CHUNKLAB_INSTANTIATE(float)
CHUNKLAB_INSTANTIATE(double)

#undef CHUNKLAB_INSTANTIATE

}  // namespace chunklab
