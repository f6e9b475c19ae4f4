#include "chunklab/trainer.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <thread>

#include "chunklab/expansion.hpp"
#include "chunklab/losses.hpp"

namespace chunklab {

namespace {

enum StreamTag : std::uint64_t { kGeneratorStream = 1, kInitStream = 2, kDataStream = 3 };

DenseArray<double> gaussian(Shape shape, double std, SeededRng& rng) {
  DenseArray<double> a(std::move(shape));
  for (auto& v : a.data) v = std * rng.normal();
  return a;
}

}  // namespace

ModelParams<double> init_params(const ExperimentConfig& cfg, SeededRng& rng) {
  const std::size_t dx = cfg.synth.d_x, dh = cfg.d_h;
  ModelParams<double> p;
  auto push = [&p](std::string name, DenseArray<double> v) {
    p.names.push_back(std::move(name));
    p.values.push_back(std::move(v));
  };
  // x_t = z_t W + noise has per-coordinate variance d_z + sigma^2; scale the
  // input maps so pre-activations start at unit variance.
  const double in_std =
      1.0 / std::sqrt(double(dx) * (double(cfg.synth.d_z) + cfg.synth.noise * cfg.synth.noise));
  push("encoder.U", gaussian({dx, dh}, in_std, rng));
  push("encoder.V", gaussian({dx, dh}, in_std, rng));
  push("encoder.gate_bias", DenseArray<double>({dh}, 0.0));
  push("encoder.O", gaussian({dh, dh}, 1.0 / std::sqrt(double(dh)), rng));
  if (cfg.chunker == ChunkerKind::cosine) {
    push("chunker.w_q", gaussian({dh, dh}, 1.0 / std::sqrt(double(dh)), rng));
    push("chunker.w_k", gaussian({dh, dh}, 1.0 / std::sqrt(double(dh)), rng));
  } else {
    push("chunker.w", gaussian({dh, 1}, cfg.init_std, rng));
    push("chunker.bias", DenseArray<double>({1}, 0.0));
  }
  return p;
}

template <class Real>
ForwardResult<Real> forward(Tape<Real>& tape, const ModelParams<Real>& params,
                            const SynthSample& sample, const ExperimentConfig& cfg,
                            const BoundaryMask* frozen_mask) {
  std::vector<Var<Real>> leaves;
  for (const auto& v : params.values) leaves.push_back(tape.leaf(v, true));
  return forward_with_leaves(tape, std::move(leaves), sample, cfg, frozen_mask);
}

template <class Real>
ForwardResult<Real> forward_with_leaves(Tape<Real>& tape, std::vector<Var<Real>> leaves,
                                        const SynthSample& sample, const ExperimentConfig& cfg,
                                        const BoundaryMask* frozen_mask) {
  if (leaves.size() != 6) throw std::invalid_argument("forward: expected 6 parameter leaves");
  ForwardResult<Real> r;
  r.leaves = std::move(leaves);
  const auto& L = r.leaves;
  auto x = tape.constant(sample.x.template cast<Real>());
  auto z = tape.constant(sample.z.template cast<Real>());

  auto xE = encode(x, EncoderParams<Real>{L[0], L[1], L[2], L[3]});
  r.scores = cfg.chunker == ChunkerKind::cosine
                 ? cosine_scores(xE, CosineChunkerParams<Real>{L[4], L[5]})
                 : sigmoid_scores(xE, SigmoidChunkerParams<Real>{L[4], L[5]});
  const auto p = r.scores.data();
  if (frozen_mask) {
    r.mask = *frozen_mask;
  } else {
    r.mask = threshold_boundaries(p);
    if (cfg.min_boundary_guard) r.mask = enforce_min_boundaries(p, r.mask, cfg.c_max);
  }
  auto c = confidences(r.scores);
  auto chunks = oracle_subsample(z, r.mask);
  auto expanded = cfg.smoothing == Smoothing::chunk ? chunk_smooth_expand(chunks, r.mask, c)
                                                    : byte_smooth_expand(chunks, r.mask, c);
  switch (cfg.fusion) {
    case Fusion::none: r.prediction = expanded.xb; break;
    case Fusion::residual: r.prediction = fuse_residual(xE, expanded.xb); break;
    case Fusion::confidence_ste: r.prediction = fuse_confidence_ste(xE, expanded.xb, c); break;
  }
  r.mse = mse(r.prediction, z);
  r.ratio = ratio_loss(r.scores, r.mask, cfg.c_tar);
  LossWeights w = cfg.weights;
  if (cfg.mse_per_element) w.mse /= double(cfg.synth.d_z);
  r.loss = total_loss<Real>(r.mse, r.ratio, std::nullopt, w);
  return r;
}

template ForwardResult<float> forward_with_leaves(Tape<float>&, std::vector<Var<float>>,
                                                  const SynthSample&, const ExperimentConfig&,
                                                  const BoundaryMask*);
template ForwardResult<double> forward_with_leaves(Tape<double>&, std::vector<Var<double>>,
                                                   const SynthSample&, const ExperimentConfig&,
                                                   const BoundaryMask*);
template ForwardResult<float> forward(Tape<float>&, const ModelParams<float>&, const SynthSample&,
                                      const ExperimentConfig&, const BoundaryMask*);
template ForwardResult<double> forward(Tape<double>&, const ModelParams<double>&,
                                       const SynthSample&, const ExperimentConfig&,
                                       const BoundaryMask*);

TrainerState TrainerState::create(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  TrainerState s;
  s.cfg = cfg;
  s.seed = seed;
  SeededRng root(seed);
  auto gen_rng = root.fork(kGeneratorStream);
  auto init_rng = root.fork(kInitStream);
  s.generator = GeneratorInstance::create(cfg.synth_config(), gen_rng);
  s.params = init_params(cfg, init_rng).cast<float>();
  s.optimizer = AdamW<float>(cfg.adamw);
  s.data_rng = root.fork(kDataStream);
  return s;
}

SynthSample TrainerState::next_sample() { return sample(cfg.synth_config(), generator, data_rng); }

namespace {

template <class Real>
LogRow make_row(std::size_t step, const ForwardResult<Real>& r, const SynthSample& sample) {
  LogRow row;
  row.step = step;
  row.l_mse = r.mse.item();
  row.l_ratio = r.ratio.item();
  row.l_total = r.loss.item();
  row.c_emp = r.mask.compression();
  const auto acc = boundary_accuracy(r.mask, sample.b_star);
  row.accuracy = acc.accuracy;
  row.f1 = acc.f1;
  return row;
}

}  // namespace

LogRow train_step(TrainerState& state, const SynthSample& sample) {
  Tape<float> tape;
  auto r = forward(tape, state.params, sample, state.cfg);
  tape.backward(r.loss);
  std::vector<std::vector<float>> grads;
  for (const auto& leaf : r.leaves) {
    auto g = leaf.grad();
    grads.emplace_back(g.begin(), g.end());
    if (grads.back().empty()) grads.back().assign(leaf.value().size(), 0.0f);
    for (float v : grads.back())
      if (!std::isfinite(v)) throw NumericalError("non-finite gradient");
  }
  auto row = make_row(state.step, r, sample);
  state.optimizer.step(state.params.values, grads);
  ++state.step;
  return row;
}

LogRow evaluate(const TrainerState& state, const SynthSample& sample) {
  Tape<float> tape;
  auto r = forward(tape, state.params, sample, state.cfg);
  return make_row(state.step, r, sample);
}

TrainLog run_experiment(const ExperimentConfig& cfg, std::uint64_t seed) {
  TrainLog log;
  log.variant = cfg.variant();
  log.seed = seed;
  try {
    auto state = TrainerState::create(cfg, seed);
    for (std::size_t s = 0; s < cfg.steps; ++s) {
      const auto sample = state.next_sample();
      log.rows.push_back(train_step(state, sample));
    }
    const auto holdout = state.next_sample();
    log.rows.push_back(evaluate(state, holdout));
  } catch (const NumericalError& e) {
    throw RunAborted(seed, std::string("numerical failure at step ") +
                               std::to_string(log.rows.size()) + ": " + e.what());
  }
  return log;
}

std::vector<ExperimentConfig> sweep_variants(const ExperimentConfig& base) {
  std::vector<ExperimentConfig> out;
  for (auto chunker : {ChunkerKind::cosine, ChunkerKind::sigmoid})
    for (auto smoothing : {Smoothing::chunk, Smoothing::byte}) {
      auto cfg = base;
      cfg.chunker = chunker;
      cfg.smoothing = smoothing;
      out.push_back(cfg);
    }
  return out;
}

std::size_t default_workers() {
  if (const char* env = std::getenv("CHUNKLAB_WORKERS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n > 0) return static_cast<std::size_t>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

SweepResult run_sweep(const std::vector<ExperimentConfig>& variants, std::size_t workers) {
  struct Job {
    std::size_t variant;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    variants[v].validate();
    for (auto seed : variants[v].seeds) jobs.push_back({v, seed});
  }
  std::vector<std::optional<TrainLog>> done(jobs.size());
  std::vector<std::string> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < jobs.size();) {
      try {
        done[j] = run_experiment(variants[jobs[j].variant], jobs[j].seed);
      } catch (const RunAborted& e) {
        errors[j] = variants[jobs[j].variant].variant() + " " + e.what();
      }
    }
  };
  if (workers == 0) workers = default_workers();
  workers = std::min(workers, jobs.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  SweepResult out;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    if (done[j]) out.logs.push_back(std::move(*done[j]));
    if (!errors[j].empty()) out.aborted.push_back(errors[j]);
  }
  return out;
}

}  // namespace chunklab
