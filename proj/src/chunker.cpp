#include "chunklab/chunker.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace chunklab {

BoundaryMask::BoundaryMask(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  check_boundary_bits(bits_);
  count_ = static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::vector<std::size_t> BoundaryMask::positions() const {
  std::vector<std::size_t> out;
  out.reserve(count_);
  for (std::size_t i = 0; i < bits_.size(); ++i)
    if (bits_[i]) out.push_back(i);
  return out;
}

template <class Real>
Var<Real> adjacent_cosine_scores(Var<Real> q, Var<Real> k) {
  if (q.shape() != k.shape() || q.value().rank() != 2)
    throw std::invalid_argument("adjacent_cosine_scores: q and k must be equal [T x d]");
  const std::size_t T = q.value().rows(), d = q.value().cols();
  const auto& Q = q.value().data;
  const auto& Kd = k.value().data;
  std::vector<double> qn(T), kn(T);
  for (std::size_t i = 0; i < T; ++i) {
    double a = 0, b = 0;
    for (std::size_t j = 0; j < d; ++j) {
      a += double(Q[i * d + j]) * Q[i * d + j];
      b += double(Kd[i * d + j]) * Kd[i * d + j];
    }
    qn[i] = std::sqrt(a);
    kn[i] = std::sqrt(b);
  }
  DenseArray<Real> p({T});
  p.data[0] = Real(1);
  std::vector<double> dots(T, 0.0);
  for (std::size_t i = 1; i < T; ++i) {
    double dot = 0;
    for (std::size_t j = 0; j < d; ++j) dot += double(Q[i * d + j]) * Kd[(i - 1) * d + j];
    dots[i] = dot;
    const double cosv = dot / (qn[i] * kn[i - 1] + kCosineNormEps);
    p.data[i] = static_cast<Real>(0.5 * (1.0 - cosv));
  }
  return q.tape().record(
      std::move(p), {q, k},
      [q, k, T, d, qn = std::move(qn), kn = std::move(kn), dots = std::move(dots)](
          Tape<Real>& t, std::span<const Real> g) {
        const auto& Qv = q.value().data;
        const auto& Kv = k.value().data;
        auto gq = t.accumulate(q);
        auto gk = t.accumulate(k);
        for (std::size_t i = 1; i < T; ++i) {
          const double a = qn[i], b = kn[i - 1];
          const double n = a * b + kCosineNormEps;
          // dp/dcos = -1/2
          const double up = -0.5 * double(g[i]);
          const double s = dots[i] / (n * n);
          const double cq = a > 0 ? s * b / a : 0.0;
          const double ck = b > 0 ? s * a / b : 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            const double qj = Qv[i * d + j], kj = Kv[(i - 1) * d + j];
            if (!gq.empty()) gq[i * d + j] += static_cast<Real>(up * (kj / n - cq * qj));
            if (!gk.empty()) gk[(i - 1) * d + j] += static_cast<Real>(up * (qj / n - ck * kj));
          }
        }
      },
      "adjacent_cosine_scores");
}

template <class Real>
Var<Real> cosine_scores(Var<Real> xE, const CosineChunkerParams<Real>& params) {
  return adjacent_cosine_scores(matmul(xE, params.w_q), matmul(xE, params.w_k));
}

template <class Real>
Var<Real> sigmoid_scores(Var<Real> xE, const SigmoidChunkerParams<Real>& params) {
  const std::size_t T = xE.value().rows();
  auto logits = add_row_bias(matmul(xE, params.w), params.bias);
  return set_first(sigmoid(reshape(logits, {T})), Real(1));
}

template <class Real>
BoundaryMask threshold_boundaries(std::span<const Real> p) {
  if (p.empty()) throw std::invalid_argument("threshold_boundaries: empty scores");
  if (p[0] != Real(1)) throw std::invalid_argument("threshold_boundaries: p_1 must be 1");
  std::vector<std::uint8_t> bits(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) bits[i] = p[i] > Real(0.5) ? 1 : 0;
  return BoundaryMask(std::move(bits));
}

template <class Real>
Var<Real> confidences(Var<Real> p) {
  DenseArray<Real> c = p.value();
  for (auto& v : c.data) v = std::max(v, Real(1) - v);
  return p.tape().record(
      std::move(c), {p},
      [p](Tape<Real>& t, std::span<const Real> g) {
        const auto& pv = p.value().data;
        auto gp = t.accumulate(p);
        for (std::size_t i = 0; i < g.size(); ++i) gp[i] += pv[i] >= Real(0.5) ? g[i] : -g[i];
      },
      "confidences");
}

BoundaryMask equal_size_boundaries(std::size_t T, std::size_t C) {
  if (C < 1) throw std::invalid_argument("equal_size_boundaries: C must be >= 1");
  if (T < 1) throw std::invalid_argument("equal_size_boundaries: T must be >= 1");
  std::vector<std::uint8_t> bits(T, 0);
  for (std::size_t i = 0; i < T; i += C) bits[i] = 1;
  return BoundaryMask(std::move(bits));
}

std::size_t min_boundary_count(std::size_t T, double c_max) {
  if (!(c_max > 1.0)) throw std::invalid_argument("c_max must be > 1");
  return static_cast<std::size_t>(std::ceil(static_cast<double>(T) / c_max));
}

template <class Real>
BoundaryMask enforce_min_boundaries(std::span<const Real> p, const BoundaryMask& b,
                                    double c_max) {
  if (p.size() != b.size()) throw std::invalid_argument("enforce_min_boundaries: length mismatch");
  const std::size_t need = min_boundary_count(b.size(), c_max);
  if (b.count() >= need) return b;
  std::vector<std::size_t> cand;
  for (std::size_t i = 0; i < b.size(); ++i)
    if (!b[i]) cand.push_back(i);
  const std::size_t extra = need - b.count();
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(extra), cand.end(),
                    [&p](std::size_t x, std::size_t y) { return p[x] > p[y] || (p[x] == p[y] && x < y); });
  std::vector<std::uint8_t> bits(b.bits().begin(), b.bits().end());
  for (std::size_t j = 0; j < extra; ++j) bits[cand[j]] = 1;
  return BoundaryMask(std::move(bits));
}

#define CHUNKLAB_INSTANTIATE(R)                                                          \
  template Var<R> adjacent_cosine_scores(Var<R>, Var<R>);                               \
  template Var<R> cosine_scores(Var<R>, const CosineChunkerParams<R>&);                 \
  template Var<R> sigmoid_scores(Var<R>, const SigmoidChunkerParams<R>&);               \
  template BoundaryMask threshold_boundaries(std::span<const R>);                       \
  template Var<R> confidences(Var<R>);                                                  \
  template BoundaryMask enforce_min_boundaries(std::span<const R>, const BoundaryMask&, \
                                               double);

CHUNKLAB_INSTANTIATE(float)
CHUNKLAB_INSTANTIATE(double)

#undef CHUNKLAB_INSTANTIATE

}  // namespace chunklab
