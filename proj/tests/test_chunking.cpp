#include <doctest.h>

#include <cmath>
#include <vector>

#include "chunklab/chunker.hpp"
#include "chunklab/expansion.hpp"
#include "chunklab/losses.hpp"
#include "chunklab/rng.hpp"
#include "chunklab/verify/gradcheck.hpp"

using namespace chunklab;
using D = DenseArray<double>;

namespace {

D random_array(Shape s, SeededRng& rng) {
  D a(std::move(s));
  for (auto& v : a.data) v = rng.normal();
  return a;
}

D identity(std::size_t n) {
  D a({n, n});
  for (std::size_t i = 0; i < n; ++i) a(i, i) = 1;
  return a;
}

BoundaryMask mask(std::vector<std::uint8_t> b) { return BoundaryMask(std::move(b)); }

std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace

TEST_CASE("cosine scores") {
  Tape<double> t;
  CosineChunkerParams<double> id{t.constant(identity(2)), t.constant(identity(2))};

  auto same = cosine_scores(t.constant(D({4, 2}, {1, 2, 1, 2, 1, 2, 1, 2})), id);
  CHECK(same.data()[0] == 1.0);
  // Off from 0 only by the 1e-8 norm guard.
  for (std::size_t i = 1; i < 4; ++i) CHECK(std::abs(same.data()[i]) < 1e-8);
  CHECK(threshold_boundaries(same.data()).count() == 1);

  auto ortho = cosine_scores(t.constant(D({3, 2}, {1, 0, 0, 1, 1, 0})), id);
  CHECK(ortho.data()[1] == doctest::Approx(0.5));
  CHECK(ortho.data()[2] == doctest::Approx(0.5));
  CHECK(threshold_boundaries(ortho.data()).count() == 1);

  auto anti = cosine_scores(t.constant(D({2, 2}, {1, 1, -1, -1})), id);
  CHECK(anti.data()[1] == doctest::Approx(1.0));
  CHECK(threshold_boundaries(anti.data()).count() == 2);
}

TEST_CASE("cosine scores ignore row scale") {
  SeededRng rng(21);
  Tape<double> t;
  CosineChunkerParams<double> params{t.constant(random_array({5, 5}, rng)),
                                     t.constant(random_array({5, 5}, rng))};
  auto x = random_array({10, 5}, rng);
  const auto base = to_vec(cosine_scores(t.constant(x), params).data());
  for (std::size_t r = 0; r < 10; ++r) {
    auto y = x;
    const double alpha = 0.1 + 10 * rng.uniform();
    for (std::size_t j = 0; j < 5; ++j) y(r, j) *= alpha;
    const auto p = to_vec(cosine_scores(t.constant(y), params).data());
    for (std::size_t i = 0; i < 10; ++i) CHECK(p[i] == doctest::Approx(base[i]).epsilon(1e-6));
  }
}

TEST_CASE("random cosine chunker concentrates near 0.5 in high dimension") {
  SeededRng rng(4);
  const std::size_t d = 256, T = 10001;
  Tape<double> t;
  auto x = t.constant(random_array({T, d}, rng));
  auto p = adjacent_cosine_scores(x, x);
  double dev = 0;
  for (std::size_t i = 1; i < T; ++i) dev += std::abs(p.data()[i] - 0.5);
  CHECK(dev / double(T - 1) < 0.1);
}

TEST_CASE("sigmoid scores") {
  Tape<double> t;
  auto x = t.constant(D({4, 3}, {1, 2, 3, -1, 0, 2, 5, 5, 5, 0, 0, 1}));
  SigmoidChunkerParams<double> zero{t.constant(D({3, 1})), t.constant(D({1}))};
  auto p = sigmoid_scores(x, zero);
  CHECK(to_vec(p.data()) == std::vector<double>{1, 0.5, 0.5, 0.5});
  CHECK(threshold_boundaries(p.data()).count() == 1);

  SigmoidChunkerParams<double> big{t.constant(D({3, 1})), t.constant(D({1}, {40.0}))};
  auto all = threshold_boundaries(sigmoid_scores(x, big).data());
  CHECK(all.count() == 4);
  CHECK(all.compression() == 1.0);

  SeededRng rng(2);
  auto res = verify::gradcheck(
      [](Tape<double>& tp, const std::vector<Var<double>>& in) {
        SeededRng wr(9);
        auto w = tp.constant(random_array({6}, wr));
        return sum(mul(sigmoid_scores(in[0], SigmoidChunkerParams<double>{in[1], in[2]}), w));
      },
      {random_array({6, 3}, rng), random_array({3, 1}, rng), D({1}, {0.2})});
  CHECK(res.norm_rel_error < 1e-4);
}

TEST_CASE("threshold is strict") {
  const std::vector<double> p{1, 0.5, 0.6};
  CHECK(threshold_boundaries<double>(p) == mask({1, 0, 1}));
  const std::vector<double> ones(5, 1.0);
  CHECK(threshold_boundaries<double>(ones).count() == 5);

  SeededRng rng(12);
  std::vector<double> r(200);
  r[0] = 1;
  for (std::size_t i = 1; i < r.size(); ++i) r[i] = rng.uniform();
  const auto b = threshold_boundaries<double>(r);
  for (std::size_t i = 0; i < r.size(); ++i) CHECK(b[i] == (r[i] > 0.5));

  const std::vector<double> bad{0.9, 0.2};
  CHECK_THROWS(threshold_boundaries<double>(bad));
}

TEST_CASE("confidences") {
  Tape<double> t;
  auto p = t.leaf(D({4}, {1.0, 0.9, 0.2, 0.5}), true);
  auto c = confidences(p);
  CHECK(c.data()[0] == 1.0);
  CHECK(c.data()[1] == doctest::Approx(0.9));
  CHECK(c.data()[2] == doctest::Approx(0.8));
  CHECK(c.data()[3] == 0.5);
  t.backward(sum(c));
  CHECK(to_vec(p.grad()) == std::vector<double>{1, 1, -1, 1});
}

TEST_CASE("equal-size boundaries") {
  auto b = equal_size_boundaries(10, 5);
  CHECK(b.positions() == std::vector<std::size_t>{0, 5});
  CHECK(equal_size_boundaries(7, 1).count() == 7);
  for (std::size_t T : {10u, 17u, 33u, 100u})
    for (std::size_t C : {1u, 3u, 4u, 8u}) {
      const auto m = equal_size_boundaries(T, C);
      CHECK(m.compression() == doctest::Approx(double(T) / std::ceil(double(T) / double(C))));
    }
  CHECK_THROWS(equal_size_boundaries(10, 0));
}

TEST_CASE("min-boundary guard") {
  const std::vector<double> p{1, .4, .3, .2};
  CHECK(enforce_min_boundaries<double>(p, mask({1, 0, 0, 0}), 2.0) == mask({1, 1, 0, 0}));
  CHECK(enforce_min_boundaries<double>(p, mask({1, 0, 1, 0}), 2.0) == mask({1, 0, 1, 0}));

  const std::vector<double> tied{1, .3, .3, .3, .3, .3};
  CHECK(enforce_min_boundaries<double>(tied, mask({1, 0, 0, 0, 0, 0}), 2.0) ==
        mask({1, 1, 1, 0, 0, 0}));

  SeededRng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t T = 2 + rng.below(300);
    std::vector<double> s(T);
    s[0] = 1;
    for (std::size_t i = 1; i < T; ++i) s[i] = 0.5 * rng.uniform();
    const auto b = enforce_min_boundaries<double>(s, threshold_boundaries<double>(s), 8.0);
    REQUIRE(b.count() == std::max<std::size_t>(1, min_boundary_count(T, 8.0)));
    REQUIRE(b.count() == std::size_t(std::ceil(double(T) / 8.0)));
    REQUIRE(b[0]);
  }
}

TEST_CASE("smoothing with unit confidence is repetition") {
  SeededRng rng(30);
  Tape<double> t;
  auto b = mask({1, 0, 1, 1, 0, 0, 1});
  auto y = t.constant(random_array({4, 3}, rng));
  auto ones = t.constant(D({7}, 1.0));
  const auto rep = repeat_rows(y, b.bits()).value().data;
  CHECK(chunk_smooth_expand(y, b, ones).xb.value().data == rep);
  CHECK(byte_smooth_expand(y, b, ones).xb.value().data == rep);
  CHECK(byte_smooth_expand(y, b, ones).xk.value().data == rep);

  auto one = mask({1, 0, 0, 0});
  auto y1 = t.constant(D({1, 2}, {3, -4}));
  auto c = t.constant(D({4}, {1, 0.7, 0.9, 0.6}));
  for (auto out : {chunk_smooth_expand(y1, one, c).xb, byte_smooth_expand(y1, one, c).xb})
    CHECK(out.value().data == std::vector<double>{3, -4, 3, -4, 3, -4, 3, -4});

  D c0({7}, 0.0);
  c0.data[0] = 1;
  auto held = byte_smooth_expand(y, b, t.constant(c0)).xb;
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(held.value()(i, j) == y.value()(0, j));
}

TEST_CASE("byte smoothing reaches every confidence, chunk smoothing only boundaries") {
  SeededRng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t T = 12;
    std::vector<std::uint8_t> bits(T, 0);
    bits[0] = bits[3] = bits[5] = bits[9] = 1;
    auto b = mask(bits);
    auto y = random_array({4, 3}, rng);
    D c({T});
    for (auto& x : c.data) x = 0.5 + 0.5 * rng.uniform();
    c.data[0] = 1;
    auto w = random_array({T, 3}, rng);
    for (bool byte : {false, true}) {
      Tape<double> t;
      auto yv = t.leaf(y, true);
      auto cv = t.leaf(c, true);
      auto out = byte ? byte_smooth_expand(yv, b, cv) : chunk_smooth_expand(yv, b, cv);
      t.backward(sum(mul(out.xb, t.constant(w))));
      std::size_t reached = 0;
      for (std::size_t i = 1; i < T; ++i) {
        if (bits[i]) continue;
        if (!byte) {
          CHECK(cv.grad()[i] == 0.0);
          continue;
        }
        // The byte-level gate only matters where the repeated row differs
        // from the running average.
        bool differs = false;
        for (std::size_t j = 0; j < 3; ++j)
          differs |= out.xk.value()(i, j) != out.xb.value()(i - 1, j);
        if (!differs) continue;
        CHECK(std::abs(cv.grad()[i]) > 0);
        ++reached;
      }
      if (byte) CHECK(reached >= 5);
    }
  }
}

TEST_CASE("byte smoothing is causal") {
  SeededRng rng(32);
  auto b = mask({1, 0, 1, 0, 0, 1, 1, 0});
  auto y = random_array({4, 2}, rng);
  D c({8});
  for (auto& x : c.data) x = 0.5 + 0.5 * rng.uniform();
  c.data[0] = 1;
  const auto pos = b.positions();
  Tape<double> t;
  const auto base = byte_smooth_expand(t.constant(y), b, t.constant(c)).xb.value();
  for (std::size_t j = 1; j < 4; ++j) {
    auto y2 = y;
    y2(j, 0) += 5;
    y2(j, 1) -= 3;
    const auto out = byte_smooth_expand(t.constant(y2), b, t.constant(c)).xb.value();
    for (std::size_t i = 0; i < pos[j]; ++i)
      for (std::size_t k = 0; k < 2; ++k) CHECK(out(i, k) == base(i, k));
  }
}

TEST_CASE("expansion gradients") {
  SeededRng rng(33);
  for (bool byte : {false, true}) {
    std::vector<std::uint8_t> bits(12, 0);
    bits[0] = bits[2] = bits[7] = bits[8] = 1;
    auto b = mask(bits);
    D c({12});
    for (auto& x : c.data) x = 0.55 + 0.4 * rng.uniform();
    auto res = verify::gradcheck(
        [&](Tape<double>& tp, const std::vector<Var<double>>& in) {
          SeededRng wr(1);
          auto w = tp.constant(random_array({12, 3}, wr));
          auto out = byte ? byte_smooth_expand(in[0], b, in[1]) : chunk_smooth_expand(in[0], b, in[1]);
          return sum(mul(out.xb, w));
        },
        {random_array({4, 3}, rng), c});
    CHECK(res.norm_rel_error < 1e-4);
  }
}

TEST_CASE("fusion") {
  SeededRng rng(34);
  Tape<double> t;
  auto xE = t.leaf(random_array({5, 3}, rng), true);
  auto xB = t.leaf(random_array({5, 3}, rng), true);
  auto c = t.leaf(D({5}, {1, 0.6, 0.8, 0.55, 0.9}), true);
  auto zero = t.constant(D({5, 3}));
  CHECK(fuse_residual(xE, zero).value().data == xE.value().data);
  CHECK(fuse_residual(xE, xB).value().data == fuse_residual(xB, xE).value().data);
  auto ste = fuse_confidence_ste(xE, xB, c);
  CHECK(ste.value().data == fuse_residual(xE, xB).value().data);

  auto up = random_array({5, 3}, rng);
  t.backward(sum(mul(ste, t.constant(up))));
  for (std::size_t i = 0; i < 5; ++i) {
    double dot = 0;
    for (std::size_t j = 0; j < 3; ++j) dot += up(i, j) * xB.value()(i, j);
    CHECK(c.grad()[i] == doctest::Approx(dot));
  }
  for (std::size_t k = 0; k < 15; ++k) {
    CHECK(xE.grad()[k] == up.data[k]);
    CHECK(xB.grad()[k] == up.data[k]);
  }
  CHECK_THROWS(fuse_residual(xE, t.constant(D({5, 2}))));
}

TEST_CASE("ratio loss") {
  for (double N : {4.0, 5.0, 8.0}) {
    CHECK(ratio_loss_value(1 / N, 1 / N, N) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ratio_loss_value(1, 1, N) == doctest::Approx(N));
  }
  CHECK_THROWS(ratio_loss_value(0.5, 0.5, 1.0));

  // Affine in G: the per-position gradient is constant with the predicted sign.
  Tape<double> t;
  auto p = t.leaf(D({8}, {1, 0.2, 0.7, 0.1, 0.9, 0.3, 0.4, 0.6}), true);
  const auto b = threshold_boundaries(p.data());
  const double F = double(b.count()) / 8.0, N = 4.0;
  t.backward(ratio_loss(p, b, N));
  const double want = N / (N - 1) * ((N - 1) * F - (1 - F)) / 8.0;
  for (double g : p.grad()) CHECK(g == doctest::Approx(want));
}

TEST_CASE("cab loss") {
  Tape<double> t;
  auto p = t.leaf(D({3}, {0.5, 0.5, 1e-6}), true);
  auto P = t.leaf(D({3}, {0.5, 0.9, 1.0}), true);
  auto terms = cab_loss_terms(p, P);
  REQUIRE(terms.value().size() == 2);
  CHECK(terms.data()[0] == doctest::Approx(0.0));
  CHECK(terms.data()[1] == doctest::Approx(0.16).epsilon(1e-12));

  auto edge = cab_loss_terms(t.constant(D({2}, {1e-6, 0})), t.constant(D({2}, {1.0, 0})));
  CHECK(edge.data()[0] == doctest::Approx(0.0).epsilon(1e-12));

  t.backward(cab_loss(p, P));
  CHECK(P.grad().empty());
  CHECK_THROWS(cab_loss(p, t.constant(D({2}, {0.5, 0.5}))));
}

TEST_CASE("total loss") {
  Tape<double> t;
  auto a = t.leaf(D({1}, {2.0}), true);
  auto b = t.leaf(D({1}, {3.0}), true);
  auto c = t.leaf(D({1}, {5.0}), true);
  CHECK(total_loss<double>(a, b, std::nullopt, LossWeights{1, 1, 0}).item() == 5.0);
  CHECK(total_loss<double>(a, b, c, LossWeights{0, 0, 0}).item() == 0.0);
  CHECK(total_loss<double>(a, b, c, LossWeights{2, 0.5, 0.01}).item() == doctest::Approx(5.55));
  CHECK_THROWS(total_loss<double>(a, b, c, LossWeights{1, -1, 0}));
}
