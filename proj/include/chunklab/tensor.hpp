#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace chunklab {

// Raised when an op produces NaN/Inf. The harness maps it to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

// Row-major dense array. A scalar has shape {1}.
template <class Real>
struct DenseArray {
  Shape shape;
  std::vector<Real> data;

  DenseArray() = default;
  explicit DenseArray(Shape s, Real fill = Real(0));
  DenseArray(Shape s, std::vector<Real> values);

  static DenseArray scalar(Real v) { return DenseArray({1}, {v}); }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  // Rows/cols view a rank-1 array as a column [T x 1].
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return rank() < 2 ? 1 : size() / rows(); }

  Real& operator()(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  Real operator()(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  std::span<const Real> row(std::size_t r) const {
    return std::span<const Real>(data).subspan(r * cols(), cols());
  }

  template <class Other>
  DenseArray<Other> cast() const {
    DenseArray<Other> out;
    out.shape = shape;
    out.data.assign(data.begin(), data.end());
    return out;
  }
};

template <class Real>
class Tape;

// Handle to a node recorded on a tape. Cheap to copy; valid while the tape lives.
template <class Real>
class Var {
 public:
  Var() = default;
  Var(Tape<Real>* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape<Real>& tape() const { return *tape_; }
  std::uint32_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const DenseArray<Real>& value() const;
  const Shape& shape() const { return value().shape; }
  std::span<const Real> data() const { return value().data; }
  // Empty when no gradient reached this node.
  std::span<const Real> grad() const;
  bool requires_grad() const;
  Real item() const;

 private:
  Tape<Real>* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so the recording
// order is already topological; backward walks it in reverse. Gradients from
// multiple consumers are summed.
template <class Real>
class Tape {
 public:
  // Receives the node's accumulated output gradient; pushes into parents via
  // Tape::accumulate.
  using BackwardFn = std::function<void(Tape&, std::span<const Real>)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Real> leaf(DenseArray<Real> value, bool requires_grad);
  Var<Real> constant(DenseArray<Real> value) { return leaf(std::move(value), false); }

  // Appends an op result. The backward rule is dropped when no parent needs a
  // gradient. Throws NumericalError on non-finite output.
  Var<Real> record(DenseArray<Real> value, std::initializer_list<Var<Real>> parents,
                   BackwardFn backward, const char* op_name);

  void backward(Var<Real> loss);

  const DenseArray<Real>& value(std::uint32_t id) const { return nodes_[id].value; }
  std::span<const Real> grad(std::uint32_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
  // Gradient buffer of a node, zero-initialised on first touch. Nodes that do
  // not require grad get an empty span and should be skipped by callers.
  std::span<Real> accumulate(Var<Real> v);

  std::size_t size() const { return nodes_.size(); }
  void zero_grad();

 private:
  struct Node {
    DenseArray<Real> value;
    std::vector<Real> grad;
    bool requires_grad = false;
    BackwardFn backward;
  };
  // deque: appending never moves existing nodes, so value() references stay valid.
  std::deque<Node> nodes_;
};

template <class Real>
const DenseArray<Real>& Var<Real>::value() const {
  return tape_->value(id_);
}
template <class Real>
std::span<const Real> Var<Real>::grad() const {
  return tape_->grad(id_);
}
template <class Real>
bool Var<Real>::requires_grad() const {
  return tape_->requires_grad(id_);
}
template <class Real>
Real Var<Real>::item() const {
  const auto& v = value();
  if (v.size() != 1) throw std::invalid_argument("item() on non-scalar " + shape_str(v.shape));
  return v.data[0];
}

// Differentiable ops. Binary elementwise ops require equal shapes; rank-1
// arrays are treated as a single column where row structure matters.
template <class Real> Var<Real> matmul(Var<Real> a, Var<Real> b);
template <class Real> Var<Real> add(Var<Real> a, Var<Real> b);
template <class Real> Var<Real> sub(Var<Real> a, Var<Real> b);
template <class Real> Var<Real> mul(Var<Real> a, Var<Real> b);
// x[T x d] + bias[d] on every row.
template <class Real> Var<Real> add_row_bias(Var<Real> x, Var<Real> bias);
// x[T x d] * s[T] row-wise.
template <class Real> Var<Real> scale_rows(Var<Real> x, Var<Real> s);
// alpha * x + beta.
template <class Real> Var<Real> affine(Var<Real> x, Real alpha, Real beta);
template <class Real> Var<Real> sum(Var<Real> x);
template <class Real> Var<Real> mean(Var<Real> x);
template <class Real> Var<Real> sigmoid(Var<Real> x);
// Zero gradient outside (lo, hi).
template <class Real> Var<Real> clamp(Var<Real> x, Real lo, Real hi);
template <class Real> Var<Real> stop_gradient(Var<Real> x);
// Forward: ones. Backward: identity into c.
template <class Real> Var<Real> ste_one(Var<Real> c);
// o_i = c_i * v_i + (1 - c_i) * o_{i-1}, o_0 = 0. c is [T] (shared across
// columns) or the same shape as v (per-channel gate).
template <class Real> Var<Real> ema_scan(Var<Real> v, Var<Real> c);
// Rows of v where b = 1. b[0] must be 1.
template <class Real> Var<Real> select_rows(Var<Real> v, std::span<const std::uint8_t> b);
// Row j of u repeated over the j-th span of b.
template <class Real> Var<Real> repeat_rows(Var<Real> u, std::span<const std::uint8_t> b);
// (1/T) * sum_t ||a_t - b_t||^2.
template <class Real> Var<Real> mse(Var<Real> a, Var<Real> b);
template <class Real> Var<Real> reshape(Var<Real> x, Shape shape);
template <class Real> Var<Real> slice_rows(Var<Real> x, std::size_t begin, std::size_t end);
// Overwrites element 0 with a constant; no gradient reaches it.
template <class Real> Var<Real> set_first(Var<Real> x, Real value);

// Validates a boundary bit vector for select/repeat: nonempty, 0/1 valued, b[0] = 1.
void check_boundary_bits(std::span<const std::uint8_t> b);

}  // namespace chunklab
