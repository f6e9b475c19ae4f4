#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "chunklab/chunker.hpp"
#include "chunklab/metrics.hpp"
#include "chunklab/rng.hpp"

using namespace chunklab;
using Bits = std::vector<std::uint8_t>;

namespace {

Bits periodic(std::size_t T, std::size_t C) {
  auto m = equal_size_boundaries(T, C);
  return {m.bits().begin(), m.bits().end()};
}

}  // namespace

TEST_CASE("enrichment") {
  const Bits b{1, 0, 0, 1, 0, 1, 0, 0};
  const std::vector<double> flat(8, 0.7);
  CHECK(enrichment(flat, b) == doctest::Approx(1.0).epsilon(1e-15));

  std::vector<double> h(b.begin(), b.end());
  CHECK(enrichment(h, b) == doctest::Approx(8.0 / 3.0));

  SeededRng rng(1);
  std::vector<double> iid(10000);
  for (auto& x : iid) x = -std::log(1 - rng.uniform());
  CHECK(std::abs(enrichment(iid, periodic(10000, 5)) - 1.0) <= 0.02);

  std::vector<double> scaled = iid;
  for (auto& x : scaled) x *= 3.7;
  const auto bb = periodic(10000, 7);
  CHECK(enrichment(scaled, bb) == doctest::Approx(enrichment(iid, bb)).epsilon(1e-9));

  CHECK_THROWS(enrichment(std::vector<double>(8, 0.0), b));
  CHECK_THROWS(enrichment(flat, Bits(8, 0)));
}

TEST_CASE("rotation null") {
  const Bits b{1, 0, 1, 0, 0, 1, 0, 0, 0, 1};
  const std::vector<double> flat(10, 2.0);
  auto st = enrichment_null(flat, b, {});
  CHECK(st.rotations == 9);
  CHECK(st.stddev < 1e-12);
  CHECK_FALSE(st.z.has_value());

  // Every rotation enumerated directly.
  SeededRng rng(2);
  std::vector<double> h(10);
  for (auto& x : h) x = rng.uniform();
  const auto rot = rotated_enrichments(h, b);
  REQUIRE(rot.size() == 9);
  for (std::size_t r = 1; r < 10; ++r) {
    Bits shifted(10);
    for (std::size_t i = 0; i < 10; ++i) shifted[(i + r) % 10] = b[i];
    CHECK(rot[r - 1] == doctest::Approx(enrichment(h, shifted)).epsilon(1e-12));
  }

  // Planted signal: large positive Z, exact and Monte Carlo agree.
  const std::size_t T = 2000;
  Bits bp(T);
  bp[0] = 1;
  for (std::size_t i = 1; i < T; ++i) bp[i] = rng.bernoulli(0.2);
  std::vector<double> hp(T);
  for (std::size_t i = 0; i < T; ++i) hp[i] = rng.uniform() + 0.1 * bp[i];
  const auto ex = enrichment_null(hp, bp, {NullMode::exact});
  const auto mc = enrichment_null(hp, bp, {NullMode::monte_carlo, 4096, 99});
  REQUIRE(ex.z);
  REQUIRE(mc.z);
  CHECK(*ex.z > 3);
  CHECK(std::abs(*ex.z - *mc.z) <= 0.2);
  CHECK(std::abs(ex.mean - mc.mean) <= 3 * ex.stddev / std::sqrt(4096.0));

  CHECK_THROWS(enrichment_null(std::vector<double>{1, 1}, Bits{1, 0}, {}));
}

TEST_CASE("gap entropy") {
  CHECK(gap_entropy(periodic(100, 5)) == 0.0);
  CHECK(gap_entropy(Bits{1, 0, 1, 0, 0, 1, 0, 1, 0, 0, 1}) == doctest::Approx(1.0));
  const Bits g2224{1, 0, 1, 0, 1, 0, 1, 0, 0, 0, 1};
  const double want = (0.75 * std::log(4.0 / 3.0) + 0.25 * std::log(4.0)) / std::log(2.0);
  CHECK(gap_entropy(g2224) == doctest::Approx(want));
  CHECK(gap_entropy(g2224) == doctest::Approx(0.811).epsilon(1e-3));
  // Same multiset of gaps, different order.
  CHECK(gap_entropy(Bits{1, 0, 0, 0, 1, 0, 1, 0, 1, 0, 1}) == doctest::Approx(want));
  CHECK_THROWS(gap_entropy(Bits{1, 0, 0}));
}

TEST_CASE("cusum range") {
  CHECK(cusum_range(Bits(20, 1)) == 0.0);
  CHECK(cusum_range(periodic(100, 5)) == doctest::Approx(0.8));
  Bits half(100, 0);
  std::fill(half.begin() + 50, half.end(), 1);
  CHECK(cusum_range(half) == doctest::Approx(25.0));
}

TEST_CASE("runs test") {
  const std::size_t m = 50;
  Bits alt(2 * m);
  for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = (i % 2 == 0);
  const auto st = runs_test(alt);
  const double n = 2.0 * m, mu = 2.0 * m * m / n + 1;
  const double sigma = std::sqrt((mu - 1) * (mu - 2) / (n - 1));
  CHECK(st.runs == 2 * m);
  CHECK(st.mu == doctest::Approx(mu));
  REQUIRE(st.z);
  CHECK(*st.z == doctest::Approx((n - mu) / sigma));
  CHECK(*st.z > 0);

  Bits two(40, 0);
  std::fill(two.begin(), two.begin() + 20, 1);
  const auto st2 = runs_test(two);
  CHECK(st2.runs == 2);
  REQUIRE(st2.z);
  CHECK(*st2.z < -5);

  CHECK_FALSE(runs_z(Bits(10, 1)).has_value());
  CHECK_FALSE(runs_z(Bits(10, 0)).has_value());
}

TEST_CASE("compression and boundary surprisal") {
  CHECK(compression(Bits(9, 1)) == 1.0);
  CHECK(compression(periodic(16380, 5)) == 5.0);
  Bits one(37, 0);
  one[0] = 1;
  CHECK(compression(one) == 37.0);
  CHECK_THROWS(compression(Bits(4, 0)));

  const Bits b{1, 0, 1, 0, 0, 1};
  CHECK(boundary_mean_surprisal_bits(std::vector<double>(6, std::log(2.0)), b) ==
        doctest::Approx(1.0));
  CHECK(boundary_mean_surprisal_bits(std::vector<double>(6, 0.0), b) == 0.0);
  const std::vector<double> h{0.3, 1.2, 2.0, 0.1, 0.5, 0.9};
  double mean = 0;
  for (double x : h) mean += x / 6;
  CHECK(boundary_mean_surprisal_bits(h, b) ==
        doctest::Approx(enrichment(h, b) * mean / std::log(2.0)));
}

TEST_CASE("trace handling") {
  Trace t{"a", {0.5, 1.0, 2.0, 0.0}, {1, 0, 1, 1}, {}};
  t.validate();
  CHECK(t.scored_boundaries().size() == 4);
  t.h.pop_back();
  CHECK_THROWS(t.validate());
  t.last_h_absent = true;
  t.validate();
  CHECK(t.hardness().size() == 3);
  CHECK(t.scored_boundaries().size() == 3);

  Trace bad{"b", {0.5, -1.0}, {1, 0}, {}};
  CHECK_THROWS(bad.validate());
  Trace none{"c", {0.5, 1.0}, {0, 0}, {}};
  CHECK_THROWS(none.validate());
}

TEST_CASE("aggregate") {
  SeededRng rng(3);
  auto make = [&](const std::string& id, std::size_t T) {
    Trace t{id, std::vector<double>(T), periodic(T, 4), {}};
    for (auto& x : t.h) x = rng.uniform() + 0.1;
    return evaluate_trace(t, {});
  };
  const auto r1 = make("x", 200);
  const MetricsReport single[] = {r1};
  const auto a1 = aggregate(single);
  CHECK(a1.B == r1.B);
  CHECK(a1.r_cusum == r1.r_cusum);

  const auto r2 = make("y", 200);
  const MetricsReport pair[] = {r1, r2};
  const auto a2 = aggregate(pair);
  CHECK(a2.B == doctest::Approx((r1.B + r2.B) / 2));
  CHECK(a2.c_emp == doctest::Approx(4.0));
  CHECK(a2.count == 2);

  // Both traces have B = 2 and mean hardness 1, so the length-weighted mean
  // must match B of the concatenation.
  Trace c1{"c1", std::vector<double>(100), periodic(100, 4), {}};
  Trace c2{"c2", std::vector<double>(300), periodic(300, 4), {}};
  for (std::size_t i = 0; i < 100; ++i) c1.h[i] = c1.b[i] ? 2.0 : 2.0 / 3.0;
  for (std::size_t i = 0; i < 300; ++i) c2.h[i] = c2.b[i] ? 2.0 : 2.0 / 3.0;
  const MetricsReport mixed[] = {evaluate_trace(c1, {}), evaluate_trace(c2, {})};
  std::vector<double> hh = c1.h;
  hh.insert(hh.end(), c2.h.begin(), c2.h.end());
  Bits bb = c1.b;
  bb.insert(bb.end(), c2.b.begin(), c2.b.end());
  CHECK(aggregate(mixed).B == doctest::Approx(enrichment(hh, bb)));
  CHECK(aggregate(mixed).T == 400);

  Trace flat{"f", std::vector<double>(50, 1.0), periodic(50, 5), {}};
  const MetricsReport with_undef[] = {r1, evaluate_trace(flat, {})};
  const auto a3 = aggregate(with_undef);
  CHECK(a3.undefined_z_b == 1);
  REQUIRE(a3.z_b);
  CHECK(*a3.z_b == doctest::Approx(*r1.z_b));

  CHECK_THROWS(aggregate(std::span<const MetricsReport>{}));
}

TEST_CASE("metrics are deterministic") {
  SeededRng rng(4);
  Trace t{"d", std::vector<double>(3000), Bits(3000), {}};
  t.b[0] = 1;
  for (std::size_t i = 0; i < 3000; ++i) {
    t.h[i] = rng.uniform();
    if (i) t.b[i] = rng.bernoulli(0.25);
  }
  NullOptions mc{NullMode::monte_carlo, 256, 5};
  const auto a = evaluate_trace(t, mc), b = evaluate_trace(t, mc);
  CHECK(a.z_b == b.z_b);
  CHECK(a.z_runs == b.z_runs);
  CHECK(a.h_g == b.h_g);
}
