#include <doctest.h>

#include <cmath>
#include <vector>

#include "chunklab/adamw.hpp"
#include "chunklab/rng.hpp"
#include "chunklab/tensor.hpp"
#include "chunklab/verify/gradcheck.hpp"

using namespace chunklab;
using D = DenseArray<double>;

namespace {

D random_array(Shape s, SeededRng& rng) {
  D a(std::move(s));
  for (auto& v : a.data) v = rng.normal();
  return a;
}

std::vector<std::uint8_t> random_mask(std::size_t T, double rate, SeededRng& rng) {
  std::vector<std::uint8_t> b(T);
  b[0] = 1;
  for (std::size_t i = 1; i < T; ++i) b[i] = rng.bernoulli(rate);
  return b;
}

}  // namespace

TEST_CASE("matmul") {
  Tape<double> t;
  auto I = t.constant(D({2, 2}, {1, 0, 0, 1}));
  auto A = t.constant(D({2, 2}, {3, -1, 2, 5}));
  CHECK(matmul(I, A).value().data == A.value().data);

  auto M = t.constant(D({2, 2}, {1, 2, 3, 4}));
  auto ones = t.constant(D({2, 1}, {1, 1}));
  auto r = matmul(M, ones);
  CHECK(r.shape() == Shape{2, 1});
  CHECK(r.value().data == std::vector<double>{3, 7});

  CHECK_THROWS_AS(matmul(M, t.constant(D({3, 1}))), std::invalid_argument);
}

TEST_CASE("matmul gradient is B^T broadcast") {
  SeededRng rng(3);
  Tape<double> t;
  auto a = t.leaf(random_array({3, 4}, rng), true);
  auto b = t.leaf(random_array({4, 2}, rng), true);
  t.backward(sum(matmul(a, b)));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 4; ++k)
      CHECK(a.grad()[i * 4 + k] == doctest::Approx(b.value()(k, 0) + b.value()(k, 1)));

  auto res = verify::gradcheck(
      [](Tape<double>&, const std::vector<Var<double>>& in) { return sum(matmul(in[0], in[1])); },
      {a.value(), b.value()});
  CHECK(res.norm_rel_error < 1e-8);
}

TEST_CASE("sigmoid") {
  Tape<float> tf;
  auto x = tf.constant(DenseArray<float>({2}, {0.0f, 50.0f}));
  auto s = sigmoid(x);
  CHECK(s.data()[0] == 0.5f);
  CHECK(s.data()[1] == doctest::Approx(1.0f).epsilon(1e-7));

  Tape<double> t;
  auto z = t.leaf(D({1}, {0.0}), true);
  t.backward(sum(sigmoid(z)));
  CHECK(z.grad()[0] == doctest::Approx(0.25));
}

TEST_CASE("clamp") {
  Tape<double> t;
  auto x = t.leaf(D({2}, {0.5, 2.0}), true);
  auto c = clamp(x, 1e-6, 1 - 1e-6);
  CHECK(c.data()[0] == 0.5);
  CHECK(c.data()[1] == 1 - 1e-6);
  t.backward(sum(c));
  CHECK(x.grad()[0] == 1.0);
  CHECK(x.grad()[1] == 0.0);
  CHECK_THROWS_AS(clamp(x, 1.0, 1.0), std::invalid_argument);

  auto res = verify::gradcheck(
      [](Tape<double>& tp, const std::vector<Var<double>>& in) {
        auto w = tp.constant(D({4}, {1, -2, 3, 0.5}));
        return sum(mul(clamp(in[0], -1.0, 1.0), w));
      },
      {D({4}, {0.1, -0.3, 0.7, -0.9})});
  CHECK(res.norm_rel_error < 1e-8);
}

TEST_CASE("stop_gradient") {
  Tape<double> t;
  auto x = t.leaf(D({3}, {1.5, -2.0, 0.25}), true);
  auto sg = stop_gradient(x);
  CHECK(sg.value().data == x.value().data);
  t.backward(sum(mul(sg, x)));
  for (std::size_t i = 0; i < 3; ++i) CHECK(x.grad()[i] == x.value().data[i]);

  // Finite differences of the composite see 2x, the tape must not.
  auto res = verify::gradcheck(
      [](Tape<double>&, const std::vector<Var<double>>& in) {
        return sum(mul(stop_gradient(in[0]), in[0]));
      },
      {x.value()});
  CHECK(res.norm_rel_error > 0.1);

  Tape<double> t2;
  auto y = t2.leaf(D({2}, {1, 2}), true);
  auto nested = stop_gradient(stop_gradient(y));
  CHECK(nested.value().data == y.value().data);
  CHECK_FALSE(nested.requires_grad());
}

TEST_CASE("ste_one") {
  Tape<double> t;
  auto c = t.leaf(D({3}, {0.3, 0.7, 1.0}), true);
  auto v = t.constant(D({3}, {2, -1, 4}));
  auto one = ste_one(c);
  for (double x : one.data()) CHECK(x == 1.0);
  t.backward(sum(mul(one, v)));
  CHECK(std::vector<double>(c.grad().begin(), c.grad().end()) == v.value().data);
}

TEST_CASE("ema_scan") {
  SeededRng rng(5);
  Tape<double> t;
  auto v = t.constant(random_array({6, 3}, rng));
  auto ones = t.constant(D({6}, 1.0));
  CHECK(ema_scan(v, ones).value().data == v.value().data);

  D c0({6}, 0.0);
  c0.data[0] = 1.0;
  auto held = ema_scan(v, t.constant(c0));
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(held.value()(i, j) == v.value()(0, j));

  D c({16});
  for (auto& x : c.data) x = 0.05 + 0.9 * rng.uniform();
  auto res = verify::gradcheck(
      [](Tape<double>& tp, const std::vector<Var<double>>& in) {
        SeededRng wr(11);
        auto w = tp.constant(random_array({16, 4}, wr));
        return sum(mul(ema_scan(in[0], in[1]), w));
      },
      {random_array({16, 4}, rng), c});
  CHECK(res.norm_rel_error < 1e-4);
  CHECK(res.max_rel_error < 1e-4);

  CHECK_THROWS_AS(ema_scan(v, t.constant(D({5}, 1.0))), std::invalid_argument);
}

TEST_CASE("select_rows and repeat_rows") {
  Tape<double> t;
  auto v = t.constant(D({4, 2}, {1, 2, 3, 4, 5, 6, 7, 8}));
  std::vector<std::uint8_t> all(4, 1);
  CHECK(select_rows(v, all).value().data == v.value().data);
  std::vector<std::uint8_t> b{1, 0, 0, 1};
  CHECK(select_rows(v, b).value().data == std::vector<double>{1, 2, 7, 8});

  auto u = t.constant(D({2, 1}, {10, 20}));
  std::vector<std::uint8_t> b2{1, 0, 1, 0};
  CHECK(repeat_rows(u, b2).value().data == std::vector<double>{10, 10, 20, 20});
  std::vector<std::uint8_t> single{1, 0, 0};
  auto u1 = t.constant(D({1, 2}, {3, 4}));
  CHECK(repeat_rows(u1, single).value().data == std::vector<double>{3, 4, 3, 4, 3, 4});

  CHECK_THROWS_AS(repeat_rows(u, std::vector<std::uint8_t>{1, 1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(select_rows(v, std::vector<std::uint8_t>{0, 1, 0, 1}), std::invalid_argument);
}

TEST_CASE("select inverts repeat on random instances") {
  SeededRng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t T = 1 + rng.below(32), d = 1 + rng.below(8);
    auto b = random_mask(T, 0.3, rng);
    std::size_t K = 0;
    for (auto x : b) K += x;
    Tape<double> t;
    auto u = t.constant(random_array({K, d}, rng));
    REQUIRE(select_rows(repeat_rows(u, b), b).value().data == u.value().data);
  }
}

TEST_CASE("repeat_rows gradient sums each span") {
  Tape<double> t;
  auto u = t.leaf(D({2, 1}, {1, 2}), true);
  std::vector<std::uint8_t> b{1, 0, 0, 1, 0};
  auto w = t.constant(D({5, 1}, {1, 2, 3, 4, 5}));
  t.backward(sum(mul(repeat_rows(u, b), w)));
  CHECK(u.grad()[0] == 6.0);
  CHECK(u.grad()[1] == 9.0);
}

TEST_CASE("mse") {
  SeededRng rng(8);
  Tape<double> t;
  auto a = t.leaf(random_array({5, 3}, rng), true);
  CHECK(mse(a, a).item() == 0.0);
  auto shifted = t.constant(D(a.value().shape, [&] {
    auto d = a.value().data;
    for (auto& x : d) x -= 1.0;
    return d;
  }()));
  CHECK(mse(a, shifted).item() == doctest::Approx(3.0));

  auto b = t.constant(random_array({5, 3}, rng));
  t.backward(mse(a, b));
  for (std::size_t i = 0; i < a.value().size(); ++i)
    CHECK(a.grad()[i] == doctest::Approx(2 * (a.value().data[i] - b.value().data[i]) / 5.0));
  CHECK_THROWS_AS(mse(a, t.constant(D({5, 2}))), std::invalid_argument);
}

TEST_CASE("backward") {
  Tape<double> t;
  auto x = t.leaf(D({3}, {1, -2, 3}), true);
  t.backward(sum(x));
  for (double g : x.grad()) CHECK(g == 1.0);

  Tape<double> t2;
  auto y = t2.leaf(D({3}, {1, -2, 3}), true);
  t2.backward(sum(mul(y, y)));
  for (std::size_t i = 0; i < 3; ++i) CHECK(y.grad()[i] == 2 * y.value().data[i]);

  CHECK_THROWS_AS(t2.backward(y), std::invalid_argument);
}

TEST_CASE("gradients accumulate over consumers") {
  Tape<double> t;
  auto x = t.leaf(D({2}, {1, 2}), true);
  t.backward(sum(add(add(x, x), x)));
  for (double g : x.grad()) CHECK(g == 3.0);
}

TEST_CASE("non-finite values are errors") {
  Tape<float> t;
  auto x = t.leaf(DenseArray<float>({1}, {1e30f}), true);
  CHECK_THROWS_AS(mul(x, x), NumericalError);
  CHECK_THROWS_AS(t.leaf(DenseArray<float>({1}, {std::nanf("")}), true), NumericalError);
}

TEST_CASE("adamw") {
  AdamWConfig cfg;
  cfg.lr = 1e-3;
  cfg.weight_decay = 0.0;

  SUBCASE("zero gradient leaves parameters unchanged") {
    AdamW<double> opt(cfg);
    std::vector<D> params{D({3}, {1, -2, 3})};
    std::vector<std::vector<double>> grads{{0, 0, 0}};
    opt.step(params, grads);
    CHECK(params[0].data == std::vector<double>{1, -2, 3});
  }
  SUBCASE("first step moves by lr in the gradient's sign") {
    AdamW<double> opt(cfg);
    std::vector<D> params{D({3}, {1, -2, 3})};
    std::vector<std::vector<double>> grads{{0.5, -3.0, 1e-2}};
    opt.step(params, grads);
    const std::vector<double> want{1 - 1e-3, -2 + 1e-3, 3 - 1e-3};
    for (int i = 0; i < 3; ++i) CHECK(params[0].data[i] == doctest::Approx(want[i]).epsilon(1e-8));
  }
  SUBCASE("two steps follow the hand recurrence") {
    AdamWConfig c2 = cfg;
    c2.weight_decay = 0.1;
    AdamW<double> opt(c2);
    std::vector<D> params{D({1}, {2.0})};
    const double g1 = 0.3, g2 = -0.7;
    double p = 2.0, m = 0, v = 0;
    int k = 0;
    for (double g : {g1, g2}) {
      ++k;
      std::vector<std::vector<double>> grads{{g}};
      opt.step(params, grads);
      p *= 1 - c2.lr * c2.weight_decay;
      m = c2.beta1 * m + (1 - c2.beta1) * g;
      v = c2.beta2 * v + (1 - c2.beta2) * g * g;
      const double mh = m / (1 - std::pow(c2.beta1, k)), vh = v / (1 - std::pow(c2.beta2, k));
      p -= c2.lr * mh / (std::sqrt(vh) + c2.eps);
      CHECK(opt.first_moment()[0][0] == doctest::Approx(m).epsilon(1e-12));
      CHECK(opt.second_moment()[0][0] == doctest::Approx(v).epsilon(1e-12));
      CHECK(params[0].data[0] == doctest::Approx(p).epsilon(1e-12));
    }
    CHECK(opt.steps() == 2);
  }
  SUBCASE("shape mismatch") {
    AdamW<double> opt(cfg);
    std::vector<D> params{D({3})};
    std::vector<std::vector<double>> grads{{0, 0}};
    CHECK_THROWS_AS(opt.step(params, grads), std::invalid_argument);
  }
}

TEST_CASE("seeded rng") {
  SeededRng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());
  }
  CHECK(SeededRng(42, 5).next_u64() == [] {
    SeededRng s(42);
    for (int i = 0; i < 5; ++i) s.next_u64();
    return s.next_u64();
  }());
  CHECK(SeededRng(42).fork(1).next_u64() != SeededRng(42).fork(2).next_u64());

  SeededRng r(7);
  double s = 0, s2 = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  CHECK(std::abs(s / n) < 0.03);
  CHECK(std::abs(s2 / n - 1.0) < 0.05);
  for (int i = 0; i < 1000; ++i) REQUIRE(r.below(7) < 7);
}
