#include "chunklab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

#include "chunklab/rng.hpp"

namespace chunklab {

namespace {

constexpr double kSigmaFloor = 1e-12;
constexpr std::size_t kExactNullLimit = std::size_t{1} << 20;
constexpr std::size_t kLargeTraceShifts = 512;

std::size_t count_ones(std::span<const std::uint8_t> b) {
  std::size_t k = 0;
  for (auto v : b) k += v ? 1 : 0;
  return k;
}

double sum_of(std::span<const double> h) {
  double s = 0;
  for (double v : h) s += v;
  return s;
}

void check_pair(std::span<const double> h, std::span<const std::uint8_t> b) {
  if (h.size() != b.size()) throw std::invalid_argument("hardness and boundary lengths differ");
  if (h.empty()) throw std::invalid_argument("empty trace");
  if (count_ones(b) == 0) throw std::invalid_argument("trace has no boundaries");
}

NullStats moments(std::span<const double> values, double observed) {
  NullStats s;
  s.rotations = values.size();
  double m = 0;
  for (double v : values) m += v;
  m /= static_cast<double>(values.size());
  double var = 0;
  for (double v : values) var += (v - m) * (v - m);
  var /= static_cast<double>(values.size());
  s.mean = m;
  s.stddev = std::sqrt(var);
  if (s.stddev >= kSigmaFloor) s.z = (observed - m) / s.stddev;
  return s;
}

}  // namespace

void Trace::validate() const {
  if (b.empty()) throw std::invalid_argument("trace " + id + ": empty");
  const std::size_t expected = last_h_absent ? b.size() - 1 : b.size();
  if (h.size() != expected)
    throw std::invalid_argument("trace " + id + ": h has " + std::to_string(h.size()) +
                                " entries, expected " + std::to_string(expected));
  for (double v : h)
    if (!std::isfinite(v) || v < 0) throw std::invalid_argument("trace " + id + ": bad surprisal");
  for (auto v : b)
    if (v > 1) throw std::invalid_argument("trace " + id + ": b must be 0/1");
  if (count_ones(b) == 0) throw std::invalid_argument("trace " + id + ": no boundaries");
}

std::span<const double> Trace::hardness() const { return h; }

std::span<const std::uint8_t> Trace::scored_boundaries() const {
  return std::span<const std::uint8_t>(b).first(h.size());
}

double enrichment(std::span<const double> h, std::span<const std::uint8_t> b) {
  check_pair(h, b);
  const double total = sum_of(h);
  if (!(total > 0)) throw std::invalid_argument("enrichment: hardness is all zero");
  double at = 0;
  std::size_t k = 0;
  for (std::size_t t = 0; t < h.size(); ++t)
    if (b[t]) {
      at += h[t];
      ++k;
    }
  return (at / static_cast<double>(k)) / (total / static_cast<double>(h.size()));
}

double enrichment(const Trace& trace) {
  return enrichment(trace.hardness(), trace.scored_boundaries());
}

std::vector<double> rotated_enrichments(std::span<const double> h,
                                        std::span<const std::uint8_t> b) {
  check_pair(h, b);
  const std::size_t T = h.size();
  if (T < 3) throw std::invalid_argument("rotation null needs T >= 3");
  const double total = sum_of(h);
  if (!(total > 0)) throw std::invalid_argument("enrichment: hardness is all zero");
  // acc[r] = sum over boundaries j of h[(j + r) mod T], split into two
  // contiguous runs per boundary.
  std::vector<double> acc(T, 0.0);
  std::size_t K = 0;
  for (std::size_t j = 0; j < T; ++j) {
    if (!b[j]) continue;
    ++K;
    const std::size_t head = T - j;
    for (std::size_t r = 0; r < head; ++r) acc[r] += h[j + r];
    for (std::size_t r = head; r < T; ++r) acc[r] += h[j + r - T];
  }
  const double scale = static_cast<double>(T) / (static_cast<double>(K) * total);
  std::vector<double> out(T - 1);
  for (std::size_t r = 1; r < T; ++r) out[r - 1] = acc[r] * scale;
  return out;
}

NullStats enrichment_null(std::span<const double> h, std::span<const std::uint8_t> b,
                          const NullOptions& opts) {
  check_pair(h, b);
  const std::size_t T = h.size();
  if (T < 3) throw std::invalid_argument("rotation null needs T >= 3");
  const double observed = enrichment(h, b);
  const bool exact = opts.mode == NullMode::exact && T <= kExactNullLimit;
  if (exact) return moments(rotated_enrichments(h, b), observed);

  const std::size_t S = opts.mode == NullMode::exact ? kLargeTraceShifts : opts.shifts;
  if (S < 2) throw std::invalid_argument("monte carlo null needs at least 2 shifts");
  const double total = sum_of(h);
  if (!(total > 0)) throw std::invalid_argument("enrichment: hardness is all zero");
  std::vector<std::size_t> starts;
  for (std::size_t j = 0; j < T; ++j)
    if (b[j]) starts.push_back(j);
  const double scale = static_cast<double>(T) / (static_cast<double>(starts.size()) * total);
  SeededRng rng(opts.seed);
  std::vector<double> values(S);
  for (auto& v : values) {
    const std::size_t r = 1 + rng.below(T - 1);
    double acc = 0;
    for (auto j : starts) acc += h[(j + r) % T];
    v = acc * scale;
  }
  return moments(values, observed);
}

NullStats enrichment_null(const Trace& trace, const NullOptions& opts) {
  return enrichment_null(trace.hardness(), trace.scored_boundaries(), opts);
}

double gap_entropy(std::span<const std::uint8_t> b) {
  std::map<std::size_t, std::size_t> freq;
  std::size_t last = 0, seen = 0, gaps = 0;
  for (std::size_t t = 0; t < b.size(); ++t) {
    if (!b[t]) continue;
    if (seen++) {
      ++freq[t - last];
      ++gaps;
    }
    last = t;
  }
  if (seen < 2) throw std::invalid_argument("gap_entropy needs at least two boundaries");
  if (freq.size() == 1) return 0.0;
  double H = 0;
  for (const auto& [gap, n] : freq) {
    const double p = static_cast<double>(n) / static_cast<double>(gaps);
    H -= p * std::log(p);
  }
  return H / std::log(static_cast<double>(freq.size()));
}

double cusum_range(std::span<const std::uint8_t> b) {
  if (b.empty()) throw std::invalid_argument("cusum_range: empty sequence");
  const double mean = static_cast<double>(count_ones(b)) / static_cast<double>(b.size());
  double S = 0, lo = 0, hi = 0;
  for (auto v : b) {
    S += static_cast<double>(v) - mean;
    lo = std::min(lo, S);
    hi = std::max(hi, S);
  }
  return hi - lo;
}

RunsStats runs_test(std::span<const std::uint8_t> b) {
  if (b.empty()) throw std::invalid_argument("runs_test: empty sequence");
  RunsStats s;
  s.runs = 1;
  for (std::size_t t = 1; t < b.size(); ++t)
    if ((b[t] != 0) != (b[t - 1] != 0)) ++s.runs;
  const double n1 = static_cast<double>(count_ones(b));
  const double n = static_cast<double>(b.size());
  const double n0 = n - n1;
  if (n1 < 1 || n0 < 1) return s;
  s.mu = 2.0 * n1 * n0 / n + 1.0;
  s.sigma = std::sqrt((s.mu - 1.0) * (s.mu - 2.0) / (n - 1.0));
  if (s.sigma > 0) s.z = (static_cast<double>(s.runs) - s.mu) / s.sigma;
  return s;
}

std::optional<double> runs_z(std::span<const std::uint8_t> b) { return runs_test(b).z; }

double compression(std::span<const std::uint8_t> b) {
  const std::size_t k = count_ones(b);
  if (k == 0) throw std::invalid_argument("compression: no boundaries");
  return static_cast<double>(b.size()) / static_cast<double>(k);
}

double boundary_mean_surprisal_bits(std::span<const double> h, std::span<const std::uint8_t> b) {
  check_pair(h, b);
  double at = 0;
  std::size_t k = 0;
  for (std::size_t t = 0; t < h.size(); ++t)
    if (b[t]) {
      at += h[t];
      ++k;
    }
  return at / static_cast<double>(k) / std::numbers::ln2;
}

double boundary_mean_surprisal_bits(const Trace& trace) {
  return boundary_mean_surprisal_bits(trace.hardness(), trace.scored_boundaries());
}

MetricsReport evaluate_trace(const Trace& trace, const NullOptions& opts) {
  trace.validate();
  MetricsReport r;
  r.id = trace.id;
  r.T = trace.b.size();
  r.K = count_ones(trace.b);
  r.c_emp = compression(trace.b);
  r.B = enrichment(trace);
  if (trace.h.size() >= 3) r.z_b = enrichment_null(trace, opts).z;
  if (r.K >= 2) r.h_g = gap_entropy(trace.b);
  r.r_cusum = cusum_range(trace.b);
  r.z_runs = runs_z(trace.b);
  r.bpb0 = boundary_mean_surprisal_bits(trace);
  return r;
}

MetricsReport aggregate(std::span<const MetricsReport> reports, const std::string& id) {
  if (reports.empty()) throw std::invalid_argument("aggregate: no reports");
  MetricsReport out;
  out.id = id;
  out.count = reports.size();
  double w_all = 0, w_zb = 0, w_hg = 0, w_zr = 0;
  double zb = 0, hg = 0, zr = 0;
  for (const auto& r : reports) {
    const double w = static_cast<double>(r.T);
    out.T += r.T;
    out.K += r.K;
    w_all += w;
    out.c_emp += w * r.c_emp;
    out.B += w * r.B;
    out.r_cusum += w * r.r_cusum;
    out.bpb0 += w * r.bpb0;
    if (r.z_b) {
      zb += w * *r.z_b;
      w_zb += w;
    } else {
      ++out.undefined_z_b;
    }
    if (r.h_g) {
      hg += w * *r.h_g;
      w_hg += w;
    } else {
      ++out.undefined_h_g;
    }
    if (r.z_runs) {
      zr += w * *r.z_runs;
      w_zr += w;
    } else {
      ++out.undefined_z_runs;
    }
  }
  out.c_emp /= w_all;
  out.B /= w_all;
  out.r_cusum /= w_all;
  out.bpb0 /= w_all;
  if (w_zb > 0) out.z_b = zb / w_zb;
  if (w_hg > 0) out.h_g = hg / w_hg;
  if (w_zr > 0) out.z_runs = zr / w_zr;
  return out;
}

}  // namespace chunklab
