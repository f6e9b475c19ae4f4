#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "chunklab/adamw.hpp"
#include "chunklab/chunker.hpp"
#include "chunklab/config.hpp"
#include "chunklab/synthetic.hpp"
#include "chunklab/tensor.hpp"

namespace chunklab {

// Encoder + chunker weights in a fixed order:
//   U, V, gate_bias, O, then w_q, w_k (cosine) or w, bias (sigmoid).
template <class Real>
struct ModelParams {
  std::vector<std::string> names;
  std::vector<DenseArray<Real>> values;

  template <class Other>
  ModelParams<Other> cast() const {
    ModelParams<Other> out;
    out.names = names;
    for (const auto& v : values) out.values.push_back(v.template cast<Other>());
    return out;
  }
};

ModelParams<double> init_params(const ExperimentConfig& cfg, SeededRng& rng);

template <class Real>
struct ForwardResult {
  Var<Real> loss;
  Var<Real> mse;
  Var<Real> ratio;
  Var<Real> scores;
  Var<Real> prediction;
  BoundaryMask mask;
  std::vector<Var<Real>> leaves;  // parameter leaves, same order as ModelParams
};

// Full forward pass: encode -> scores -> threshold (+ guard) -> confidences ->
// oracle read-out -> expansion (-> fusion) -> mse + weighted ratio loss.
// When frozen_mask is given it replaces the thresholded mask; finite
// difference checks use this to hold the discrete path fixed.
template <class Real>
ForwardResult<Real> forward(Tape<Real>& tape, const ModelParams<Real>& params,
                            const SynthSample& sample, const ExperimentConfig& cfg,
                            const BoundaryMask* frozen_mask = nullptr);

// Same, with the parameter leaves already recorded on the tape.
template <class Real>
ForwardResult<Real> forward_with_leaves(Tape<Real>& tape, std::vector<Var<Real>> leaves,
                                        const SynthSample& sample, const ExperimentConfig& cfg,
                                        const BoundaryMask* frozen_mask = nullptr);

struct LogRow {
  std::size_t step = 0;
  double l_mse = 0;
  double l_ratio = 0;
  double l_total = 0;
  double c_emp = 0;
  double accuracy = 0;
  double f1 = 0;
};

// steps training rows followed by one evaluation row (step == steps) on a
// fresh sample after the last update.
struct TrainLog {
  std::string variant;
  std::uint64_t seed = 0;
  std::vector<LogRow> rows;
};

class RunAborted : public std::runtime_error {
 public:
  RunAborted(std::uint64_t seed, const std::string& what)
      : std::runtime_error("seed " + std::to_string(seed) + ": " + what), seed_(seed) {}
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

struct TrainerState {
  ExperimentConfig cfg;
  std::uint64_t seed = 0;
  GeneratorInstance generator;
  ModelParams<float> params;
  AdamW<float> optimizer;
  SeededRng data_rng{0};
  std::size_t step = 0;

  static TrainerState create(const ExperimentConfig& cfg, std::uint64_t seed);
  SynthSample next_sample();
};

// One forward/backward/update on the given sample; returns the pre-update
// metrics. Throws NumericalError on a non-finite loss.
LogRow train_step(TrainerState& state, const SynthSample& sample);
// Forward only.
LogRow evaluate(const TrainerState& state, const SynthSample& sample);

TrainLog run_experiment(const ExperimentConfig& cfg, std::uint64_t seed);

struct SweepResult {
  std::vector<TrainLog> logs;  // ordered by (variant, seed)
  std::vector<std::string> aborted;
};

// The four chunker x smoothing combinations.
std::vector<ExperimentConfig> sweep_variants(const ExperimentConfig& base);

// Runs every (variant, seed) job on `workers` threads (0 = from the
// CHUNKLAB_WORKERS environment variable, else hardware concurrency).
SweepResult run_sweep(const std::vector<ExperimentConfig>& variants, std::size_t workers = 0);

std::size_t default_workers();

}  // namespace chunklab
