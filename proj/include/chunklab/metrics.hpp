#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace chunklab {

// One model trace. h[t] is the surprisal (nats) of the target predicted from
// position t, i.e. h_t = s_{t+1}; b[t] marks a chunk start at t.
struct Trace {
  std::string id;
  std::vector<double> h;
  std::vector<std::uint8_t> b;
  std::optional<std::string> domain;
  // The final position has no next target; its h is excluded when set.
  bool last_h_absent = false;

  void validate() const;
  // Hardness and boundary arrays restricted to positions with a defined h.
  std::span<const double> hardness() const;
  std::span<const std::uint8_t> scored_boundaries() const;
};

struct NullStats {
  double mean = 0;
  double stddev = 0;
  std::optional<double> z;  // empty when stddev < 1e-12
  std::size_t rotations = 0;
};

enum class NullMode { exact, monte_carlo };

struct NullOptions {
  NullMode mode = NullMode::exact;
  std::size_t shifts = 512;
  std::uint64_t seed = 0;
};

struct MetricsReport {
  std::string id;
  std::size_t T = 0;
  std::size_t K = 0;
  double c_emp = 0;
  double B = 0;
  std::optional<double> z_b;
  std::optional<double> h_g;
  double r_cusum = 0;
  std::optional<double> z_runs;
  double bpb0 = 0;
  // Only set on aggregates: how many inputs had each optional field undefined.
  std::size_t undefined_z_b = 0;
  std::size_t undefined_h_g = 0;
  std::size_t undefined_z_runs = 0;
  std::size_t count = 1;
};

// (sum b h / sum b) / mean(h).
double enrichment(std::span<const double> h, std::span<const std::uint8_t> b);
double enrichment(const Trace& trace);

// Enrichment of every nonzero circular rotation of b against h; index r-1
// holds rotation r (b shifted forward by r positions).
std::vector<double> rotated_enrichments(std::span<const double> h,
                                        std::span<const std::uint8_t> b);
NullStats enrichment_null(std::span<const double> h, std::span<const std::uint8_t> b,
                          const NullOptions& opts);
NullStats enrichment_null(const Trace& trace, const NullOptions& opts);

// Normalised entropy of inter-boundary gaps. 0 for a single distinct gap.
// Throws with fewer than two boundaries.
double gap_entropy(std::span<const std::uint8_t> b);

// max_t S_t - min_t S_t with S_t = sum_{i<=t} (b_i - mean b), S_0 = 0.
double cusum_range(std::span<const std::uint8_t> b);

struct RunsStats {
  std::size_t runs = 0;
  double mu = 0;
  double sigma = 0;
  std::optional<double> z;  // empty for all-zero/all-one input
};
// Wald-Wolfowitz runs test, z = (R - mu_R) / sigma_R.
RunsStats runs_test(std::span<const std::uint8_t> b);
std::optional<double> runs_z(std::span<const std::uint8_t> b);

double compression(std::span<const std::uint8_t> b);

// Mean surprisal over chunk starts, in bits.
double boundary_mean_surprisal_bits(std::span<const double> h, std::span<const std::uint8_t> b);
double boundary_mean_surprisal_bits(const Trace& trace);

MetricsReport evaluate_trace(const Trace& trace, const NullOptions& opts);

// Length-weighted mean of each defined field.
MetricsReport aggregate(std::span<const MetricsReport> reports, const std::string& id = "ALL");

}  // namespace chunklab
