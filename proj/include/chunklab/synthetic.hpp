#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "chunklab/chunker.hpp"
#include "chunklab/rng.hpp"
#include "chunklab/tensor.hpp"

namespace chunklab {

// Piecewise-constant change-point benchmark. boundary_rate = 1 / C_tar.
struct SynthConfig {
  std::size_t T = 4096;
  std::size_t d_z = 64;
  std::size_t d_x = 16;
  double boundary_rate = 0.25;
  double noise = 0.1;
  std::uint64_t seed = 1;

  void validate() const;
};

// Fixed observation map W [d_z x d_x], entries i.i.d. N(0, 1).
struct GeneratorInstance {
  DenseArray<double> W;

  static GeneratorInstance create(const SynthConfig& cfg, SeededRng& rng);
};

struct SynthSample {
  DenseArray<float> z;  // [T x d_z]
  DenseArray<float> x;  // [T x d_x]
  BoundaryMask b_star;
};

// b_t ~ Bernoulli(p) with b_1 = 1; one N(0, I) prototype per segment;
// x_t = z_t^T W + eps_t, eps_t ~ N(0, noise^2 I).
SynthSample sample(const SynthConfig& cfg, const GeneratorInstance& gen, SeededRng& rng);

// Causal gated linear recurrence used as the encoder:
//   g_t = sigmoid(x_t V + gate_bias), h_t = (1 - g_t) h_{t-1} + g_t (x_t U),
//   out_t = h_t O, h_0 = 0.
template <class Real>
struct EncoderParams {
  Var<Real> U;          // [d_x x d_h]
  Var<Real> V;          // [d_x x d_h]
  Var<Real> gate_bias;  // [d_h]
  Var<Real> O;          // [d_h x d_h]
};

template <class Real>
Var<Real> encode(Var<Real> x, const EncoderParams<Real>& params);

// Ground-truth latents read out at predicted chunk starts. z is detached.
template <class Real>
Var<Real> oracle_subsample(Var<Real> z, const BoundaryMask& b_hat);

struct BoundaryAccuracy {
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

BoundaryAccuracy boundary_accuracy(const BoundaryMask& b_hat, const BoundaryMask& b_star);

// Binary dump: "SMB1", then little-endian u64 T, d_z, d_x, f64 noise,
// f64 boundary_rate, u64 seed, u64 sample count; then per sample f32 z and x
// row-major and b_star packed eight positions per byte, least significant bit
// first.
void write_dataset(const std::filesystem::path& path, const SynthConfig& cfg,
                   const std::vector<SynthSample>& samples);
struct Dataset {
  SynthConfig cfg;
  std::vector<SynthSample> samples;
};
Dataset read_dataset(const std::filesystem::path& path);

}  // namespace chunklab
