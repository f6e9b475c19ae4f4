#include "chunklab/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace chunklab {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw std::invalid_argument("empty shape");
  for (auto s : shape)
    if (s == 0) throw std::invalid_argument("zero extent in shape " + shape_str(shape));
}

template <class Real>
void require_same_shape(const Var<Real>& a, const Var<Real>& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
}

template <class Real>
void require_same_tape(const Var<Real>& a, const Var<Real>& b) {
  if (&a.tape() != &b.tape()) throw std::invalid_argument("vars belong to different tapes");
}

template <class Real>
using RowMajor = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class Real>
using ConstMap = Eigen::Map<const RowMajor<Real>>;
template <class Real>
using MutMap = Eigen::Map<RowMajor<Real>>;

}  // namespace

void check_boundary_bits(std::span<const std::uint8_t> b) {
  if (b.empty()) throw std::invalid_argument("boundary mask is empty");
  for (auto v : b)
    if (v > 1) throw std::invalid_argument("boundary mask must be 0/1");
  if (b[0] != 1) throw std::invalid_argument("boundary mask must start with a boundary (b1 = 1)");
}

// ---------------------------------------------------------------------------
// DenseArray

template <class Real>
DenseArray<Real>::DenseArray(Shape s, Real fill) : shape(std::move(s)) {
  check_shape(shape);
  data.assign(shape_size(shape), fill);
}

template <class Real>
DenseArray<Real>::DenseArray(Shape s, std::vector<Real> values)
    : shape(std::move(s)), data(std::move(values)) {
  check_shape(shape);
  if (data.size() != shape_size(shape))
    throw std::invalid_argument("data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
}

// ---------------------------------------------------------------------------
// Tape

template <class Real>
Var<Real> Tape<Real>::leaf(DenseArray<Real> value, bool requires_grad) {
  check_shape(value.shape);
  for (Real x : value.data)
    if (!std::isfinite(x)) throw NumericalError("non-finite value in leaf");
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var<Real>(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

template <class Real>
Var<Real> Tape<Real>::record(DenseArray<Real> value, std::initializer_list<Var<Real>> parents,
                             BackwardFn backward, const char* op_name) {
  for (Real x : value.data)
    if (!std::isfinite(x)) throw NumericalError(std::string("non-finite output from ") + op_name);
  Node n;
  n.value = std::move(value);
  for (const auto& p : parents) {
    if (&p.tape() != this) throw std::invalid_argument("parent belongs to another tape");
    n.requires_grad = n.requires_grad || nodes_[p.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var<Real>(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

template <class Real>
std::span<Real> Tape<Real>::accumulate(Var<Real> v) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) return {};
  if (n.grad.empty()) n.grad.assign(n.value.size(), Real(0));
  return n.grad;
}

template <class Real>
void Tape<Real>::zero_grad() {
  for (auto& n : nodes_) n.grad.clear();
}

template <class Real>
void Tape<Real>::backward(Var<Real> loss) {
  if (&loss.tape() != this) throw std::invalid_argument("loss belongs to another tape");
  if (loss.value().size() != 1)
    throw std::invalid_argument("backward needs a scalar loss, got " + shape_str(loss.shape()));
  auto seed = accumulate(loss);
  if (seed.empty()) return;
  seed[0] += Real(1);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    // The rule may grow parents' buffers but never this node's, so a copy is
    // not needed; take a span over the stable vector.
    n.backward(*this, std::span<const Real>(n.grad));
  }
}

// ---------------------------------------------------------------------------
// Ops

template <class Real>
Var<Real> matmul(Var<Real> a, Var<Real> b) {
  require_same_tape(a, b);
  const auto& A = a.value();
  const auto& B = b.value();
  if (A.rank() != 2 || B.rank() != 2)
    throw std::invalid_argument("matmul expects rank-2 operands");
  const std::size_t m = A.shape[0], k = A.shape[1], n = B.shape[1];
  if (B.shape[0] != k)
    throw std::invalid_argument("matmul: inner dims mismatch " + shape_str(A.shape) + " x " +
                                shape_str(B.shape));
  DenseArray<Real> out({m, n});
  MutMap<Real>(out.data.data(), m, n).noalias() =
      ConstMap<Real>(A.data.data(), m, k) * ConstMap<Real>(B.data.data(), k, n);
  return a.tape().record(
      std::move(out), {a, b},
      [a, b, m, k, n](Tape<Real>& t, std::span<const Real> g) {
        ConstMap<Real> G(g.data(), m, n);
        if (auto ga = t.accumulate(a); !ga.empty())
          MutMap<Real>(ga.data(), m, k).noalias() +=
              G * ConstMap<Real>(b.value().data.data(), k, n).transpose();
        if (auto gb = t.accumulate(b); !gb.empty())
          MutMap<Real>(gb.data(), k, n).noalias() +=
              ConstMap<Real>(a.value().data.data(), m, k).transpose() * G;
      },
      "matmul");
}

template <class Real>
Var<Real> add(Var<Real> a, Var<Real> b) {
  require_same_tape(a, b);
  require_same_shape(a, b, "add");
  DenseArray<Real> out = a.value();
  const auto& bd = b.value().data;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += bd[i];
  return a.tape().record(
      std::move(out), {a, b},
      [a, b](Tape<Real>& t, std::span<const Real> g) {
        for (auto v : {a, b})
          if (auto gv = t.accumulate(v); !gv.empty())
            for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
      },
      "add");
}

template <class Real>
Var<Real> sub(Var<Real> a, Var<Real> b) {
  require_same_tape(a, b);
  require_same_shape(a, b, "sub");
  DenseArray<Real> out = a.value();
  const auto& bd = b.value().data;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= bd[i];
  return a.tape().record(
      std::move(out), {a, b},
      [a, b](Tape<Real>& t, std::span<const Real> g) {
        if (auto ga = t.accumulate(a); !ga.empty())
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        if (auto gb = t.accumulate(b); !gb.empty())
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      },
      "sub");
}

template <class Real>
Var<Real> mul(Var<Real> a, Var<Real> b) {
  require_same_tape(a, b);
  require_same_shape(a, b, "mul");
  DenseArray<Real> out = a.value();
  const auto& bd = b.value().data;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= bd[i];
  return a.tape().record(
      std::move(out), {a, b},
      [a, b](Tape<Real>& t, std::span<const Real> g) {
        if (auto ga = t.accumulate(a); !ga.empty()) {
          const auto& bv = b.value().data;
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
        }
        if (auto gb = t.accumulate(b); !gb.empty()) {
          const auto& av = a.value().data;
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
        }
      },
      "mul");
}

template <class Real>
Var<Real> add_row_bias(Var<Real> x, Var<Real> bias) {
  require_same_tape(x, bias);
  const auto& X = x.value();
  const std::size_t rows = X.rows(), cols = X.cols();
  if (bias.value().size() != cols)
    throw std::invalid_argument("add_row_bias: bias length " +
                                std::to_string(bias.value().size()) + " vs " +
                                std::to_string(cols) + " columns");
  DenseArray<Real> out = X;
  const auto& bd = bias.value().data;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out.data[r * cols + c] += bd[c];
  return x.tape().record(
      std::move(out), {x, bias},
      [x, bias, rows, cols](Tape<Real>& t, std::span<const Real> g) {
        if (auto gx = t.accumulate(x); !gx.empty())
          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        if (auto gb = t.accumulate(bias); !gb.empty())
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) gb[c] += g[r * cols + c];
      },
      "add_row_bias");
}

template <class Real>
Var<Real> scale_rows(Var<Real> x, Var<Real> s) {
  require_same_tape(x, s);
  const auto& X = x.value();
  const std::size_t rows = X.rows(), cols = X.cols();
  if (s.value().size() != rows)
    throw std::invalid_argument("scale_rows: scale length mismatch");
  DenseArray<Real> out = X;
  const auto& sd = s.value().data;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out.data[r * cols + c] *= sd[r];
  return x.tape().record(
      std::move(out), {x, s},
      [x, s, rows, cols](Tape<Real>& t, std::span<const Real> g) {
        if (auto gx = t.accumulate(x); !gx.empty()) {
          const auto& sv = s.value().data;
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += g[r * cols + c] * sv[r];
        }
        if (auto gs = t.accumulate(s); !gs.empty()) {
          const auto& xv = x.value().data;
          for (std::size_t r = 0; r < rows; ++r) {
            Real acc = 0;
            for (std::size_t c = 0; c < cols; ++c) acc += g[r * cols + c] * xv[r * cols + c];
            gs[r] += acc;
          }
        }
      },
      "scale_rows");
}

template <class Real>
Var<Real> affine(Var<Real> x, Real alpha, Real beta) {
  DenseArray<Real> out = x.value();
  for (auto& v : out.data) v = alpha * v + beta;
  return x.tape().record(
      std::move(out), {x},
      [x, alpha](Tape<Real>& t, std::span<const Real> g) {
        auto gx = t.accumulate(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += alpha * g[i];
      },
      "affine");
}

template <class Real>
Var<Real> sum(Var<Real> x) {
  double acc = 0;
  for (Real v : x.value().data) acc += v;
  return x.tape().record(
      DenseArray<Real>::scalar(static_cast<Real>(acc)), {x},
      [x](Tape<Real>& t, std::span<const Real> g) {
        auto gx = t.accumulate(x);
        for (auto& v : gx) v += g[0];
      },
      "sum");
}

template <class Real>
Var<Real> mean(Var<Real> x) {
  const auto n = static_cast<double>(x.value().size());
  return affine(sum(x), static_cast<Real>(1.0 / n), Real(0));
}

template <class Real>
Var<Real> sigmoid(Var<Real> x) {
  DenseArray<Real> out = x.value();
  for (auto& v : out.data) {
    // Split by sign so exp never overflows.
    if (v >= 0) {
      v = Real(1) / (Real(1) + std::exp(-v));
    } else {
      const Real e = std::exp(v);
      v = e / (Real(1) + e);
    }
  }
  const std::uint32_t self = static_cast<std::uint32_t>(x.tape().size());
  return x.tape().record(
      std::move(out), {x},
      [x, self](Tape<Real>& t, std::span<const Real> g) {
        const auto& s = t.value(self).data;
        auto gx = t.accumulate(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * s[i] * (Real(1) - s[i]);
      },
      "sigmoid");
}

template <class Real>
Var<Real> clamp(Var<Real> x, Real lo, Real hi) {
  if (!(lo < hi)) throw std::invalid_argument("clamp: lo must be < hi");
  DenseArray<Real> out = x.value();
  for (auto& v : out.data) v = std::clamp(v, lo, hi);
  return x.tape().record(
      std::move(out), {x},
      [x, lo, hi](Tape<Real>& t, std::span<const Real> g) {
        const auto& xv = x.value().data;
        auto gx = t.accumulate(x);
        for (std::size_t i = 0; i < g.size(); ++i)
          if (xv[i] > lo && xv[i] < hi) gx[i] += g[i];
      },
      "clamp");
}

template <class Real>
Var<Real> stop_gradient(Var<Real> x) {
  return x.tape().record(x.value(), {}, nullptr, "stop_gradient");
}

template <class Real>
Var<Real> ste_one(Var<Real> c) {
  DenseArray<Real> out(c.shape(), Real(1));
  return c.tape().record(
      std::move(out), {c},
      [c](Tape<Real>& t, std::span<const Real> g) {
        auto gc = t.accumulate(c);
        for (std::size_t i = 0; i < g.size(); ++i) gc[i] += g[i];
      },
      "ste_one");
}

template <class Real>
Var<Real> ema_scan(Var<Real> v, Var<Real> c) {
  require_same_tape(v, c);
  const auto& V = v.value();
  const auto& C = c.value();
  const std::size_t T = V.rows(), d = V.cols();
  const bool per_channel = C.size() == V.size() && C.shape == V.shape && d > 1;
  if (!per_channel && C.size() != T)
    throw std::invalid_argument("ema_scan: gate shape " + shape_str(C.shape) +
                                " does not match values " + shape_str(V.shape));
  auto gate = [&C, per_channel, d](std::size_t i, std::size_t j) {
    return per_channel ? C.data[i * d + j] : C.data[i];
  };
  DenseArray<Real> out(V.shape);
  for (std::size_t i = 0; i < T; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const Real prev = i ? out.data[(i - 1) * d + j] : Real(0);
      const Real ci = gate(i, j);
      out.data[i * d + j] = ci * V.data[i * d + j] + (Real(1) - ci) * prev;
    }
  const std::uint32_t self = static_cast<std::uint32_t>(v.tape().size());
  return v.tape().record(
      std::move(out), {v, c},
      [v, c, self, T, d, per_channel](Tape<Real>& t, std::span<const Real> g) {
        const auto& O = t.value(self).data;
        const auto& Vd = v.value().data;
        const auto& Cd = c.value().data;
        auto gv = t.accumulate(v);
        auto gc = t.accumulate(c);
        // carry[j] = dL/do_i including the path through o_{i+1}.
        std::vector<Real> carry(d, Real(0));
        for (std::size_t i = T; i-- > 0;) {
          Real dc_row = 0;
          for (std::size_t j = 0; j < d; ++j) {
            const Real ci = per_channel ? Cd[i * d + j] : Cd[i];
            const Real total = g[i * d + j] + carry[j];
            const Real prev = i ? O[(i - 1) * d + j] : Real(0);
            if (!gv.empty()) gv[i * d + j] += ci * total;
            const Real dc = total * (Vd[i * d + j] - prev);
            if (per_channel) {
              if (!gc.empty()) gc[i * d + j] += dc;
            } else {
              dc_row += dc;
            }
            carry[j] = (Real(1) - ci) * total;
          }
          if (!per_channel && !gc.empty()) gc[i] += dc_row;
        }
      },
      "ema_scan");
}

template <class Real>
Var<Real> select_rows(Var<Real> v, std::span<const std::uint8_t> b) {
  check_boundary_bits(b);
  const auto& V = v.value();
  const std::size_t T = V.rows(), d = V.cols();
  if (b.size() != T) throw std::invalid_argument("select_rows: mask length mismatch");
  std::vector<std::size_t> picked;
  for (std::size_t i = 0; i < T; ++i)
    if (b[i]) picked.push_back(i);
  Shape shape = V.shape;
  shape[0] = picked.size();
  DenseArray<Real> out(shape);
  for (std::size_t k = 0; k < picked.size(); ++k)
    std::copy_n(V.data.begin() + picked[k] * d, d, out.data.begin() + k * d);
  return v.tape().record(
      std::move(out), {v},
      [v, picked = std::move(picked), d](Tape<Real>& t, std::span<const Real> g) {
        auto gv = t.accumulate(v);
        for (std::size_t k = 0; k < picked.size(); ++k)
          for (std::size_t j = 0; j < d; ++j) gv[picked[k] * d + j] += g[k * d + j];
      },
      "select_rows");
}

template <class Real>
Var<Real> repeat_rows(Var<Real> u, std::span<const std::uint8_t> b) {
  check_boundary_bits(b);
  const auto& U = u.value();
  const std::size_t K = U.rows(), d = U.cols(), T = b.size();
  std::size_t count = 0;
  for (auto x : b) count += x;
  if (count != K)
    throw std::invalid_argument("repeat_rows: mask has " + std::to_string(count) +
                                " boundaries but " + std::to_string(K) + " rows were given");
  // owner[i] = chunk index governing position i.
  std::vector<std::uint32_t> owner(T);
  std::size_t chunk = 0;
  for (std::size_t i = 0; i < T; ++i) {
    if (i > 0 && b[i]) ++chunk;
    owner[i] = static_cast<std::uint32_t>(chunk);
  }
  Shape shape = U.shape;
  shape[0] = T;
  DenseArray<Real> out(shape);
  for (std::size_t i = 0; i < T; ++i)
    std::copy_n(U.data.begin() + owner[i] * d, d, out.data.begin() + i * d);
  return u.tape().record(
      std::move(out), {u},
      [u, owner = std::move(owner), d](Tape<Real>& t, std::span<const Real> g) {
        auto gu = t.accumulate(u);
        for (std::size_t i = 0; i < owner.size(); ++i)
          for (std::size_t j = 0; j < d; ++j) gu[owner[i] * d + j] += g[i * d + j];
      },
      "repeat_rows");
}

template <class Real>
Var<Real> mse(Var<Real> a, Var<Real> b) {
  require_same_tape(a, b);
  require_same_shape(a, b, "mse");
  const auto& A = a.value().data;
  const auto& B = b.value().data;
  const double T = static_cast<double>(a.value().rows());
  double acc = 0;
  for (std::size_t i = 0; i < A.size(); ++i) {
    const double diff = static_cast<double>(A[i]) - static_cast<double>(B[i]);
    acc += diff * diff;
  }
  return a.tape().record(
      DenseArray<Real>::scalar(static_cast<Real>(acc / T)), {a, b},
      [a, b, T](Tape<Real>& t, std::span<const Real> g) {
        const auto& Av = a.value().data;
        const auto& Bv = b.value().data;
        const Real k = static_cast<Real>(2.0 / T) * g[0];
        if (auto ga = t.accumulate(a); !ga.empty())
          for (std::size_t i = 0; i < Av.size(); ++i) ga[i] += k * (Av[i] - Bv[i]);
        if (auto gb = t.accumulate(b); !gb.empty())
          for (std::size_t i = 0; i < Av.size(); ++i) gb[i] -= k * (Av[i] - Bv[i]);
      },
      "mse");
}

template <class Real>
Var<Real> reshape(Var<Real> x, Shape shape) {
  if (shape_size(shape) != x.value().size())
    throw std::invalid_argument("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  DenseArray<Real> out(std::move(shape), x.value().data);
  return x.tape().record(
      std::move(out), {x},
      [x](Tape<Real>& t, std::span<const Real> g) {
        auto gx = t.accumulate(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      },
      "reshape");
}

template <class Real>
Var<Real> slice_rows(Var<Real> x, std::size_t begin, std::size_t end) {
  const auto& X = x.value();
  if (begin >= end || end > X.rows())
    throw std::invalid_argument("slice_rows: bad range");
  const std::size_t d = X.cols();
  Shape shape = X.shape;
  shape[0] = end - begin;
  DenseArray<Real> out(shape,
                       std::vector<Real>(X.data.begin() + begin * d, X.data.begin() + end * d));
  return x.tape().record(
      std::move(out), {x},
      [x, begin, d](Tape<Real>& t, std::span<const Real> g) {
        auto gx = t.accumulate(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[begin * d + i] += g[i];
      },
      "slice_rows");
}

template <class Real>
Var<Real> set_first(Var<Real> x, Real value) {
  DenseArray<Real> out = x.value();
  out.data[0] = value;
  return x.tape().record(
      std::move(out), {x},
      [x](Tape<Real>& t, std::span<const Real> g) {
        auto gx = t.accumulate(x);
        for (std::size_t i = 1; i < g.size(); ++i) gx[i] += g[i];
      },
      "set_first");
}

#define CHUNKLAB_INSTANTIATE(R)                                                       \
  template struct DenseArray<R>;                                                     \
  template class Tape<R>;                                                            \
  template Var<R> matmul(Var<R>, Var<R>);                                            \
  template Var<R> add(Var<R>, Var<R>);                                               \
  template Var<R> sub(Var<R>, Var<R>);                                               \
  template Var<R> mul(Var<R>, Var<R>);                                               \
  template Var<R> add_row_bias(Var<R>, Var<R>);                                      \
  template Var<R> scale_rows(Var<R>, Var<R>);                                        \
  template Var<R> affine(Var<R>, R, R);                                              \
  template Var<R> sum(Var<R>);                                                       \
  template Var<R> mean(Var<R>);                                                      \
  template Var<R> sigmoid(Var<R>);                                                   \
  template Var<R> clamp(Var<R>, R, R);                                               \
  template Var<R> stop_gradient(Var<R>);                                             \
  template Var<R> ste_one(Var<R>);                                                   \
  template Var<R> ema_scan(Var<R>, Var<R>);                                          \
  template Var<R> select_rows(Var<R>, std::span<const std::uint8_t>);                \
  template Var<R> repeat_rows(Var<R>, std::span<const std::uint8_t>);                \
  template Var<R> mse(Var<R>, Var<R>);                                               \
  template Var<R> reshape(Var<R>, Shape);                                            \
  template Var<R> slice_rows(Var<R>, std::size_t, std::size_t);                      \
  template Var<R> set_first(Var<R>, R);

CHUNKLAB_INSTANTIATE(float)
CHUNKLAB_INSTANTIATE(double)

#undef CHUNKLAB_INSTANTIATE

}  // namespace chunklab
