#include "chunklab/verify/suites.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

#include "chunklab/chunker.hpp"
#include "chunklab/expansion.hpp"
#include "chunklab/losses.hpp"
#include "chunklab/metrics.hpp"
#include "chunklab/rng.hpp"
#include "chunklab/synthetic.hpp"
#include "chunklab/trainer.hpp"
#include "chunklab/verify/gradcheck.hpp"

namespace chunklab::verify {

namespace {

using D = DenseArray<double>;
using V = Var<double>;
using Inputs = std::vector<V>;

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

D normal(Shape s, SeededRng& rng, double scale = 1.0) {
  D a(std::move(s));
  for (auto& v : a.data) v = scale * rng.normal();
  return a;
}

D uniform(Shape s, SeededRng& rng, double lo, double hi) {
  D a(std::move(s));
  for (auto& v : a.data) v = lo + (hi - lo) * rng.uniform();
  return a;
}

// Uniform in (lo, hi) but at least `gap` away from each kink.
D away_from(Shape s, SeededRng& rng, double lo, double hi, std::initializer_list<double> kinks,
            double gap) {
  D a(std::move(s));
  for (auto& v : a.data) {
    bool ok = false;
    while (!ok) {
      v = lo + (hi - lo) * rng.uniform();
      ok = true;
      for (double k : kinks) ok = ok && std::abs(v - k) >= gap;
    }
  }
  return a;
}

std::vector<std::uint8_t> random_bits(std::size_t T, double rate, SeededRng& rng) {
  std::vector<std::uint8_t> b(T);
  b[0] = 1;
  for (std::size_t t = 1; t < T; ++t) b[t] = rng.bernoulli(rate) ? 1 : 0;
  return b;
}

// Reduces any output to a scalar with a fixed random weighting, so every
// output entry is checked.
V project(V out, const D& weights) {
  auto& tape = out.tape();
  return sum(mul(out, tape.constant(weights)));
}

struct OpCase {
  std::string name;
  // Draws the inputs and returns a builder for one instance.
  std::function<std::pair<std::vector<D>, LossBuilder>(SeededRng&)> make;
};

std::vector<OpCase> op_cases() {
  std::vector<OpCase> cases;
  auto unary = [&cases](std::string name, Shape in, Shape out,
                        std::function<V(V)> op, double lo = 0, double hi = 0,
                        std::initializer_list<double> kinks = {}) {
    std::vector<double> kk(kinks);
    cases.push_back({name, [=](SeededRng& rng) {
                       D x = hi > lo ? away_from(in, rng, lo, hi, {}, 0) : normal(in, rng);
                       if (!kk.empty())
                         for (auto& v : x.data)
                           for (double k : kk)
                             if (std::abs(v - k) < 1e-2) v = k + (v < k ? -1e-2 : 1e-2);
                       D w = normal(out, rng);
                       LossBuilder b = [op, w](Tape<double>&, const Inputs& in) {
                         return project(op(in[0]), w);
                       };
                       return std::make_pair(std::vector<D>{x}, b);
                     }});
  };
  auto binary = [&cases](std::string name, Shape a, Shape b, Shape out,
                         std::function<V(V, V)> op) {
    cases.push_back({name, [=](SeededRng& rng) {
                       D x = normal(a, rng), y = normal(b, rng), w = normal(out, rng);
                       LossBuilder f = [op, w](Tape<double>&, const Inputs& in) {
                         return project(op(in[0], in[1]), w);
                       };
                       return std::make_pair(std::vector<D>{x, y}, f);
                     }});
  };

  binary("matmul", {4, 3}, {3, 5}, {4, 5}, [](V a, V b) { return matmul(a, b); });
  binary("add", {4, 3}, {4, 3}, {4, 3}, [](V a, V b) { return add(a, b); });
  binary("sub", {4, 3}, {4, 3}, {4, 3}, [](V a, V b) { return sub(a, b); });
  binary("mul", {4, 3}, {4, 3}, {4, 3}, [](V a, V b) { return mul(a, b); });
  binary("add_row_bias", {5, 3}, {3}, {5, 3}, [](V a, V b) { return add_row_bias(a, b); });
  binary("scale_rows", {5, 3}, {5}, {5, 3}, [](V a, V b) { return scale_rows(a, b); });
  binary("mse", {6, 4}, {6, 4}, {1}, [](V a, V b) { return mse(a, b); });
  unary("affine", {4, 3}, {4, 3}, [](V x) { return affine(x, 1.7, -0.3); });
  unary("sum", {4, 3}, {1}, [](V x) { return sum(x); });
  unary("mean", {4, 3}, {1}, [](V x) { return mean(x); });
  unary("sigmoid", {4, 3}, {4, 3}, [](V x) { return sigmoid(x); });
  unary("clamp", {4, 3}, {4, 3}, [](V x) { return clamp(x, -0.5, 0.5); }, -1.0, 1.0,
        {-0.5, 0.5});
  unary("reshape", {4, 3}, {3, 4}, [](V x) { return reshape(x, {3, 4}); });
  unary("slice_rows", {6, 2}, {3, 2}, [](V x) { return slice_rows(x, 1, 4); });
  unary("set_first", {6}, {6}, [](V x) { return set_first(x, 1.0); });
  unary("confidences", {8}, {8}, [](V p) { return confidences(p); }, 0.01, 0.99, {0.5});

  cases.push_back({"ema_scan shared gate", [](SeededRng& rng) {
                     D v = normal({8, 3}, rng), c = uniform({8}, rng, 0.05, 0.95);
                     D w = normal({8, 3}, rng);
                     LossBuilder f = [w](Tape<double>&, const Inputs& in) {
                       return project(ema_scan(in[0], in[1]), w);
                     };
                     return std::make_pair(std::vector<D>{v, c}, f);
                   }});
  cases.push_back({"ema_scan per-channel gate", [](SeededRng& rng) {
                     D v = normal({8, 3}, rng), c = uniform({8, 3}, rng, 0.05, 0.95);
                     D w = normal({8, 3}, rng);
                     LossBuilder f = [w](Tape<double>&, const Inputs& in) {
                       return project(ema_scan(in[0], in[1]), w);
                     };
                     return std::make_pair(std::vector<D>{v, c}, f);
                   }});
  cases.push_back({"select_rows", [](SeededRng& rng) {
                     auto bits = random_bits(10, 0.4, rng);
                     std::size_t K = 0;
                     for (auto v : bits) K += v;
                     D v = normal({10, 3}, rng), w = normal({K, 3}, rng);
                     LossBuilder f = [w, bits](Tape<double>&, const Inputs& in) {
                       return project(select_rows(in[0], bits), w);
                     };
                     return std::make_pair(std::vector<D>{v}, f);
                   }});
  cases.push_back({"repeat_rows", [](SeededRng& rng) {
                     auto bits = random_bits(10, 0.4, rng);
                     std::size_t K = 0;
                     for (auto v : bits) K += v;
                     D u = normal({K, 3}, rng), w = normal({10, 3}, rng);
                     LossBuilder f = [w, bits](Tape<double>&, const Inputs& in) {
                       return project(repeat_rows(in[0], bits), w);
                     };
                     return std::make_pair(std::vector<D>{u}, f);
                   }});
  cases.push_back({"adjacent_cosine_scores", [](SeededRng& rng) {
                     D q = normal({8, 4}, rng), k = normal({8, 4}, rng), w = normal({8}, rng);
                     LossBuilder f = [w](Tape<double>&, const Inputs& in) {
                       return project(adjacent_cosine_scores(in[0], in[1]), w);
                     };
                     return std::make_pair(std::vector<D>{q, k}, f);
                   }});
  cases.push_back({"cosine_scores", [](SeededRng& rng) {
                     D x = normal({8, 4}, rng), wq = normal({4, 4}, rng, 0.5),
                       wk = normal({4, 4}, rng, 0.5), w = normal({8}, rng);
                     LossBuilder f = [w](Tape<double>&, const Inputs& in) {
                       return project(cosine_scores(in[0], CosineChunkerParams<double>{in[1], in[2]}), w);
                     };
                     return std::make_pair(std::vector<D>{x, wq, wk}, f);
                   }});
  cases.push_back({"sigmoid_scores", [](SeededRng& rng) {
                     D x = normal({8, 4}, rng), wv = normal({4, 1}, rng, 0.5),
                       bias = normal({1}, rng), w = normal({8}, rng);
                     LossBuilder f = [w](Tape<double>&, const Inputs& in) {
                       return project(sigmoid_scores(in[0], SigmoidChunkerParams<double>{in[1], in[2]}), w);
                     };
                     return std::make_pair(std::vector<D>{x, wv, bias}, f);
                   }});
  for (bool byte : {false, true}) {
    cases.push_back({byte ? "byte_smooth_expand" : "chunk_smooth_expand", [byte](SeededRng& rng) {
                       BoundaryMask mask(random_bits(10, 0.4, rng));
                       D y = normal({mask.count(), 3}, rng), c = uniform({10}, rng, 0.5, 1.0);
                       D w = normal({10, 3}, rng);
                       LossBuilder f = [w, mask, byte](Tape<double>&, const Inputs& in) {
                         auto e = byte ? byte_smooth_expand(in[0], mask, in[1])
                                       : chunk_smooth_expand(in[0], mask, in[1]);
                         return project(e.xb, w);
                       };
                       return std::make_pair(std::vector<D>{y, c}, f);
                     }});
  }
  binary("fuse_residual", {6, 3}, {6, 3}, {6, 3}, [](V a, V b) { return fuse_residual(a, b); });
  cases.push_back({"ratio_loss", [](SeededRng& rng) {
                     D p = uniform({16}, rng, 0.01, 0.99);
                     BoundaryMask mask(random_bits(16, 0.3, rng));
                     const double N = 2.0 + 6.0 * rng.uniform();
                     LossBuilder f = [mask, N](Tape<double>&, const Inputs& in) {
                       return ratio_loss(in[0], mask, N);
                     };
                     return std::make_pair(std::vector<D>{p}, f);
                   }});
  cases.push_back({"cab_loss", [](SeededRng& rng) {
                     D p = uniform({12}, rng, 0.01, 0.99), P = uniform({12}, rng, 0.01, 0.99);
                     LossBuilder f = [P](Tape<double>& tape, const Inputs& in) {
                       return cab_loss(in[0], tape.constant(P));
                     };
                     return std::make_pair(std::vector<D>{p}, f);
                   }});
  cases.push_back({"encode", [](SeededRng& rng) {
                     D x = normal({8, 3}, rng), U = normal({3, 4}, rng, 0.5),
                       Vg = normal({3, 4}, rng, 0.5), gb = normal({4}, rng, 0.5),
                       O = normal({4, 4}, rng, 0.5), w = normal({8, 4}, rng);
                     LossBuilder f = [w](Tape<double>&, const Inputs& in) {
                       return project(encode(in[0], EncoderParams<double>{in[1], in[2], in[3], in[4]}), w);
                     };
                     return std::make_pair(std::vector<D>{x, U, Vg, gb, O}, f);
                   }});
  return cases;
}

CheckResult summarize(const std::string& name, const std::vector<GradCheckResult>& runs,
                      double tol) {
  double worst_norm = 0, worst_entry = 0;
  for (const auto& r : runs) {
    worst_norm = std::max(worst_norm, r.norm_rel_error);
    worst_entry = std::max(worst_entry, r.max_rel_error);
  }
  CheckResult c{name, runs.size() >= 10 && worst_norm < tol, ""};
  c.detail = fmt("%g instances, max rel err %.3g (per-entry %.3g)", double(runs.size()),
                 worst_norm, worst_entry);
  return c;
}

}  // namespace

std::vector<CheckResult> op_gradient_suite(std::size_t instances, double tol) {
  std::vector<CheckResult> out;
  std::uint64_t salt = 0;
  for (const auto& op : op_cases()) {
    SeededRng rng = SeededRng(20240917).fork(++salt);
    std::vector<GradCheckResult> runs;
    for (std::size_t i = 0; i < instances; ++i) {
      auto [inputs, build] = op.make(rng);
      runs.push_back(gradcheck(build, inputs));
    }
    out.push_back(summarize("grad " + op.name, runs, tol));
  }
  return out;
}

std::vector<CheckResult> composite_gradient_suite(std::size_t instances, double tol) {
  std::vector<CheckResult> out;
  for (auto chunker : {ChunkerKind::cosine, ChunkerKind::sigmoid})
    for (auto smoothing : {Smoothing::chunk, Smoothing::byte})
      for (auto fusion : {Fusion::none, Fusion::residual}) {
        ExperimentConfig cfg;
        cfg.chunker = chunker;
        cfg.smoothing = smoothing;
        cfg.fusion = fusion;
        cfg.synth.T = 32;
        cfg.synth.d_z = 8;
        cfg.synth.d_x = 4;
        cfg.d_h = 8;
        cfg.init_std = 0.5;  // spread sigmoid scores away from the threshold
        std::vector<GradCheckResult> runs;
        std::size_t skipped = 0;
        for (std::uint64_t seed = 1; runs.size() < instances && seed < 20 * instances; ++seed) {
          auto state = TrainerState::create(cfg, seed);
          const auto smp = state.next_sample();
          const auto params = state.params.cast<double>();
          Tape<double> probe;
          const auto base = forward(probe, params, smp, cfg);
          // c = max(p, 1 - p) has a kink at 0.5; differences straddling it
          // measure the kink, not the gradient.
          double margin = 1;
          for (double p : base.scores.data()) margin = std::min(margin, std::abs(p - 0.5));
          if (margin < 1e-3) {
            ++skipped;
            continue;
          }
          const BoundaryMask mask = base.mask;
          runs.push_back(gradcheck(
              [&](Tape<double>& tape, const Inputs& leaves) {
                return forward_with_leaves(tape, leaves, smp, cfg, &mask).loss;
              },
              params.values));
        }
        auto c = summarize("grad train_step " + cfg.variant() + " fusion=" + to_string(fusion),
                           runs, tol);
        if (skipped) c.detail += fmt(", %g near-threshold draws skipped", double(skipped));
        out.push_back(c);
      }
  return out;
}

std::vector<CheckResult> metric_closed_form_suite() {
  std::vector<CheckResult> out;
  auto check = [&out](std::string name, double got, double want, double tol) {
    const bool ok = std::abs(got - want) <= tol;
    out.push_back({name, ok, fmt("got %.12g want %.12g", got, want)});
  };
  SeededRng rng(99);

  {
    const std::size_t T = 1000;
    auto bits = random_bits(T, 0.2, rng);
    std::vector<double> h(T, 0.37);
    check("B constant hardness", enrichment(h, bits), 1.0, 1e-12);
    std::size_t K = 0;
    for (std::size_t t = 0; t < T; ++t) {
      h[t] = bits[t];
      K += bits[t];
    }
    check("B indicator hardness", enrichment(h, bits), double(T) / double(K), 1e-9);
  }
  {
    const auto periodic = equal_size_boundaries(16380, 5);
    check("H_g periodic", gap_entropy(periodic.bits()), 0.0, 0.0);
    // gaps 2,2,2,4
    std::vector<std::uint8_t> b(12, 0);
    for (std::size_t t : {0u, 2u, 4u, 6u, 10u}) b[t] = 1;
    const double want = (0.75 * std::log(4.0 / 3.0) + 0.25 * std::log(4.0)) / std::log(2.0);
    check("H_g gaps {2,2,2,4}", gap_entropy(b), want, 1e-9);
    check("H_g gaps {2,2,2,4} = 0.811278", gap_entropy(b), 0.8112781244591328, 1e-9);
  }
  {
    const auto p5 = equal_size_boundaries(16380, 5);
    check("R_cusum period-5", cusum_range(p5.bits()), 0.8, 1e-9);
    std::vector<std::uint8_t> step(100, 0);
    std::fill(step.begin() + 50, step.end(), 1);
    check("R_cusum half/half T=100", cusum_range(step), 25.0, 1e-9);
  }
  {
    for (std::size_t m : {5u, 50u, 500u}) {
      std::vector<std::uint8_t> alt(2 * m);
      for (std::size_t t = 0; t < alt.size(); ++t) alt[t] = t % 2 == 0;
      const double md = double(m);
      const double want = std::sqrt((md - 1) * (2 * md - 1) / md);
      const auto z = runs_z(alt);
      check("runs_z alternating m=" + std::to_string(m), z.value_or(NAN), want, 1e-9);
    }
    // 1^a 0^c: two runs.
    const std::size_t a = 30, c = 70;
    std::vector<std::uint8_t> two(a + c, 0);
    std::fill(two.begin(), two.begin() + a, 1);
    const double n = a + c, mu = 2.0 * a * c / n + 1.0;
    const double sigma = std::sqrt((mu - 1) * (mu - 2) / (n - 1));
    check("runs_z two runs", runs_z(two).value_or(NAN), (2.0 - mu) / sigma, 1e-9);
  }
  return out;
}

std::vector<CheckResult> null_calibration_suite(double scale) {
  std::vector<CheckResult> out;
  auto count = [scale](std::size_t n) {
    return std::max<std::size_t>(10, static_cast<std::size_t>(std::lround(n * scale)));
  };

  {
    // Planted enrichment of random strength; exact vs S=4096 Monte Carlo.
    SeededRng rng(4242);
    const std::size_t trials = count(1000), T = 1024;
    double worst = 0, zmax = 0;
    std::size_t undefined = 0;
    for (std::size_t i = 0; i < trials; ++i) {
      auto bits = random_bits(T, 0.2, rng);
      const double beta = 0.3 * rng.uniform();
      std::vector<double> h(T);
      for (std::size_t t = 0; t < T; ++t) h[t] = -std::log(1.0 - rng.uniform()) + beta * bits[t];
      const auto ex = enrichment_null(h, bits, {NullMode::exact, 0, 0});
      const auto mc = enrichment_null(h, bits, {NullMode::monte_carlo, 4096, rng.next_u64()});
      if (!ex.z || !mc.z) {
        ++undefined;
        continue;
      }
      worst = std::max(worst, std::abs(*ex.z - *mc.z));
      zmax = std::max(zmax, std::abs(*ex.z));
    }
    out.push_back({"null exact vs MC(S=4096)", worst <= 0.2 && undefined == 0,
                   fmt("%g traces, max |dZ| %.4f (|Z| up to %.2f)", double(trials), worst, zmax)});
  }
  {
    // A pattern rotated against its own aligned hardness is just another
    // draw from the rotation null.
    SeededRng rng(777);
    const std::size_t trials = count(200), T = 2048;
    std::size_t within = 0;
    for (std::size_t i = 0; i < trials; ++i) {
      auto bits = random_bits(T, 0.25, rng);
      std::vector<double> h(T);
      for (std::size_t t = 0; t < T; ++t) h[t] = -std::log(1.0 - rng.uniform()) + 0.5 * bits[t];
      const std::size_t r = 1 + rng.below(T - 1);
      std::vector<std::uint8_t> rotated(T);
      for (std::size_t t = 0; t < T; ++t) rotated[(t + r) % T] = bits[t];
      const auto z = enrichment_null(h, rotated, {NullMode::exact, 0, 0}).z;
      if (z && std::abs(*z) <= 3) ++within;
    }
    const double frac = double(within) / double(trials);
    out.push_back({"null rotated own hardness |Z_B|<=3", frac >= 0.95,
                   fmt("%.1f%% of %g trials", 100 * frac, double(trials))});
  }
  {
    SeededRng rng(31337);
    const std::size_t trials = count(1000), T = 16384;
    double s = 0, s2 = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < trials; ++i) {
      std::vector<std::uint8_t> b(T);
      for (auto& v : b) v = rng.bernoulli(0.2) ? 1 : 0;
      if (auto z = runs_z(b)) {
        s += *z;
        s2 += *z * *z;
        ++n;
      }
    }
    const double mean = s / double(n);
    const double sd = std::sqrt((s2 - double(n) * mean * mean) / double(n - 1));
    out.push_back({"runs_z Bernoulli(0.2) calibration",
                   n == trials && std::abs(mean) <= 0.1 && sd >= 0.9 && sd <= 1.1,
                   fmt("%g trials, mean %.4f, std %.4f", double(n), mean, sd)});
  }
  return out;
}

std::vector<CheckResult> ratio_loss_suite() {
  std::vector<CheckResult> out;
  for (double N : {4.0, 5.0, 8.0}) {
    double best_f = 0, best = INFINITY;
    for (int i = 1; i <= 999; ++i) {
      const double f = i * 1e-3;
      const double L = ratio_loss_value(f, f, N);
      if (L < best) {
        best = L;
        best_f = f;
      }
    }
    const double at_target = ratio_loss_value(1.0 / N, 1.0 / N, N);
    // The minimiser on the grid is the grid point nearest 1/N.
    const bool ok = std::abs(best_f - 1.0 / N) <= 0.5e-3 + 1e-12 && std::abs(at_target - 1) <= 1e-6;
    out.push_back({"ratio loss argmin N=" + std::to_string(int(N)), ok,
                   fmt("argmin f=%.4f (1/N=%.4f), L(1/N)=%.9f", best_f, 1.0 / N, at_target)});
  }
  // The tape op agrees with the closed form.
  Tape<double> tape;
  std::vector<std::uint8_t> bits = {1, 0, 0, 1, 0, 0, 0, 1};
  auto p = tape.leaf(D({8}, std::vector<double>{1, .2, .3, .7, .1, .4, .2, .9}), true);
  const double L = ratio_loss(p, BoundaryMask(bits), 4.0).item();
  const double G = (1 + .2 + .3 + .7 + .1 + .4 + .2 + .9) / 8.0, F = 3.0 / 8.0;
  const double want = 4.0 / 3.0 * (3.0 * F * G + (1 - F) * (1 - G));
  out.push_back({"ratio loss op vs closed form", std::abs(L - want) <= 1e-12,
                 fmt("got %.12g want %.12g", L, want)});
  return out;
}

std::vector<CheckResult> cab_loss_suite() {
  std::vector<CheckResult> out;
  {
    // p_t pairs with P_{t+1}; P_next[t] already holds P_{t+1}.
    Tape<double> tape;
    auto p = tape.leaf(D({3}, std::vector<double>{0.5, 0.5, 0.3}), true);
    auto P = tape.leaf(D({3}, std::vector<double>{0.9, 0.5, 0.2}), true);
    auto terms = cab_loss_terms(p, P);
    const auto v = terms.data();
    const bool ok = v.size() == 2 && std::abs(v[0] - 0.16) <= 1e-9 && std::abs(v[1]) <= 1e-9;
    out.push_back({"cab per-position values", ok,
                   fmt("terms %.12g %.12g (want 0.16, 0)", v.size() > 0 ? v[0] : NAN,
                       v.size() > 1 ? v[1] : NAN)});
    auto loss = cab_loss(p, P);
    tape.backward(loss);
    double leak = 0;
    for (double g : P.grad()) leak = std::max(leak, std::abs(g));
    double pg = 0;
    for (double g : p.grad()) pg = std::max(pg, std::abs(g));
    out.push_back({"cab no gradient into P_next", leak == 0.0 && pg > 0,
                   fmt("max |dL/dP| = %g, max |dL/dp| = %g", leak, pg)});
  }
  {
    Tape<double> tape;
    auto p = tape.leaf(D({2}, std::vector<double>{1e-6, 0.5}), false);
    auto P = tape.leaf(D({2}, std::vector<double>{1.0, 0.5}), false);
    const double v = cab_loss_terms(p, P).data()[0];
    out.push_back({"cab clamp boundary case", std::abs(v) <= 1e-18, fmt("term %.3g", v)});
  }
  {
    // 1-D scan over p for several P; argmin should sit at clamp(1 - P).
    double worst = 0;
    for (double P : {0.0, 1e-7, 0.1, 0.37, 0.5, 0.9, 1.0}) {
      double best_p = 0, best = INFINITY;
      for (int i = 0; i <= 100000; ++i) {
        const double pv = i * 1e-5;
        Tape<double> tape;
        auto p = tape.leaf(D({2}, std::vector<double>{pv, 0.5}), false);
        auto Pn = tape.leaf(D({2}, std::vector<double>{P, 0.5}), false);
        const double v = cab_loss_terms(p, Pn).data()[0];
        if (v < best) {
          best = v;
          best_p = pv;
        }
      }
      const double eps = 1e-6;
      const double target = std::clamp(1.0 - std::clamp(P, eps, 1 - eps), eps, 1 - eps);
      worst = std::max(worst, std::abs(best_p - target));
    }
    out.push_back({"cab minimiser clamp(1-P)", worst <= 1e-5, fmt("max |p* - target| %.3g", worst)});
  }
  return out;
}

std::vector<CheckResult> oracle_reconstruction_suite() {
  std::vector<CheckResult> out;
  SynthConfig cfg;
  cfg.T = 512;
  cfg.d_z = 16;
  cfg.d_x = 8;
  cfg.noise = 0.0;
  cfg.boundary_rate = 0.25;
  SeededRng root(5);
  auto gen_rng = root.fork(1);
  const auto gen = GeneratorInstance::create(cfg, gen_rng);
  auto data_rng = root.fork(3);
  const auto s = sample(cfg, gen, data_rng);

  for (bool byte : {false, true}) {
    Tape<double> tape;
    auto z = tape.constant(s.z.cast<double>());
    auto c = tape.constant(D({cfg.T}, 1.0));
    auto y = oracle_subsample(z, s.b_star);
    auto e = byte ? byte_smooth_expand(y, s.b_star, c) : chunk_smooth_expand(y, s.b_star, c);
    const double m = mse(e.xb, z).item();
    out.push_back({std::string("oracle b_hat=b_star MSE=0 (") + (byte ? "byte" : "chunk") + ")",
                   m == 0.0, fmt("MSE %.3g", m)});
  }
  {
    // K = 1: every position is predicted by z_1. Brute force: variance about
    // the sequence mean plus the offset of z_1 from that mean.
    std::vector<std::uint8_t> one(cfg.T, 0);
    one[0] = 1;
    const BoundaryMask mask(one);
    Tape<double> tape;
    auto z = tape.constant(s.z.cast<double>());
    auto c = tape.constant(D({cfg.T}, 1.0));
    auto e = byte_smooth_expand(oracle_subsample(z, mask), mask, c);
    const double m = mse(e.xb, z).item();
    const std::size_t T = cfg.T, d = cfg.d_z;
    std::vector<double> mean(d, 0.0);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t j = 0; j < d; ++j) mean[j] += double(s.z.data[t * d + j]) / double(T);
    double var = 0, offset = 0;
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t j = 0; j < d; ++j) {
        const double dv = double(s.z.data[t * d + j]) - mean[j];
        var += dv * dv / double(T);
      }
    for (std::size_t j = 0; j < d; ++j) {
      const double dv = double(s.z.data[j]) - mean[j];
      offset += dv * dv;
    }
    const double want = var + offset;
    out.push_back({"oracle K=1 MSE = variance + first-row offset", std::abs(m - want) <= 1e-6 * want,
                   fmt("MSE %.10g, brute %.10g (variance %.6g)", m, want, var)});
  }
  return out;
}

}  // namespace chunklab::verify
