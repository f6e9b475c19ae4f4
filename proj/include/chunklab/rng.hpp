#pragma once

#include <cstdint>

namespace chunklab {

// Counter-based generator: the n-th draw is a pure function of (seed, n), so
// streams are identical on every platform and cheap to fork.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed, std::uint64_t counter = 0)
      : seed_(seed), counter_(counter) {}

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  // Independent child stream keyed by a tag.
  SeededRng fork(std::uint64_t tag) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

// SplitMix64 finaliser.
std::uint64_t mix64(std::uint64_t x);

}  // namespace chunklab
