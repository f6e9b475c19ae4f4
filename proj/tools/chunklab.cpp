// chunklab command line: synth-gen, train, sweep, trace-eval, report, selftest.
//
// Exit codes: 0 ok, 1 usage/config error, 2 numerical abort (or failed
// selftest), 3 trace-eval finished but skipped malformed records.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "chunklab/config.hpp"
#include "chunklab/metrics.hpp"
#include "chunklab/report.hpp"
#include "chunklab/rng.hpp"
#include "chunklab/synthetic.hpp"
#include "chunklab/trainer.hpp"
#include "chunklab/verify/suites.hpp"

namespace fs = std::filesystem;
using namespace chunklab;

namespace {

constexpr int kOk = 0, kUsage = 1, kNumerical = 2, kPartial = 3;

struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> values;
  CLI::App* app = nullptr;

  void attach(CLI::App* sub) {
    app = sub;
    sub->add_option("--config", config_path, "key=value config file")->check(CLI::ExistingFile);
    for (const auto& k : config_keys()) sub->add_option("--" + k.name, values[k.name], k.help);
  }

  // File first, then flags on top.
  ExperimentConfig resolve() const {
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    for (const auto& k : config_keys())
      if (app->count("--" + k.name)) apply_setting(cfg, k.name, values.at(k.name));
    cfg.validate();
    return cfg;
  }
};

std::string to_text(const auto& write, const auto& rows) {
  std::ostringstream os;
  write(os, rows);
  return os.str();
}

void prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create " + dir.string());
}

int cmd_synth_gen(const ConfigFlags& flags, const fs::path& out, std::size_t count) {
  const auto cfg = flags.resolve();
  const auto scfg = cfg.synth_config();
  prepare_out_dir(out);
  SeededRng root(scfg.seed);
  auto gen_rng = root.fork(1);
  auto data_rng = root.fork(3);
  const auto gen = GeneratorInstance::create(scfg, gen_rng);
  std::vector<SynthSample> samples;
  for (std::size_t i = 0; i < count; ++i) samples.push_back(sample(scfg, gen, data_rng));
  write_dataset(out / "dataset.smb1", scfg, samples);
  write_dataset_sidecar(out / "dataset.json", scfg, samples.size());
  auto m = make_manifest("synth-gen", cfg);
  m.artifacts = {"dataset.smb1", "dataset.json"};
  write_manifest(out / "manifest.json", m);
  std::cout << "wrote " << count << " sample(s) of T=" << scfg.T << " to " << out.string() << "\n";
  return kOk;
}

int finish_runs(const std::string& command, const ExperimentConfig& cfg, const SweepResult& res,
                const fs::path& out, bool with_curves) {
  prepare_out_dir(out);
  auto m = make_manifest(command, cfg);
  write_artifact(out, "train_log.csv", to_text(write_train_log_csv, std::span<const TrainLog>(res.logs)), m);
  if (with_curves) {
    write_artifact(out, "curves.csv", to_text(write_curves_csv, sweep_curves(res.logs)), m);
    write_artifact(out, "summary.csv",
                   to_text(write_summary_csv, sweep_summary(res.logs, res.aborted)), m);
  }
  for (const auto& a : res.aborted) {
    std::cerr << "aborted: " << a << "\n";
    m.notes.push_back("aborted: " + a);
  }
  write_manifest(out / "manifest.json", m);
  for (const auto& l : res.logs)
    std::cout << l.variant << " seed " << l.seed << ": final L_mse " << csv_number(l.rows.back().l_mse)
              << " C_emp " << csv_number(l.rows.back().c_emp) << "\n";
  return res.aborted.empty() ? kOk : kNumerical;
}

int cmd_train(const ConfigFlags& flags, const fs::path& out, std::size_t workers) {
  const auto cfg = flags.resolve();
  return finish_runs("train", cfg, run_sweep({cfg}, workers), out, false);
}

int cmd_sweep(const ConfigFlags& flags, const fs::path& out, std::size_t workers,
              const std::vector<std::string>& only) {
  const auto cfg = flags.resolve();
  auto variants = sweep_variants(cfg);
  if (!only.empty()) {
    std::vector<ExperimentConfig> keep;
    for (const auto& v : variants)
      if (std::find(only.begin(), only.end(), v.variant()) != only.end()) keep.push_back(v);
    if (keep.size() != only.size())
      throw ConfigError("--variants: expected labels among cos+chunk, cos+byte, sig+chunk, sig+byte");
    variants = keep;
  }
  return finish_runs("sweep", cfg, run_sweep(variants, workers), out, true);
}

int cmd_trace_eval(const std::vector<std::string>& files, const std::string& mode,
                   std::size_t shifts, std::uint64_t seed, const fs::path& out,
                   std::size_t workers) {
  NullOptions base;
  if (mode == "exact") base.mode = NullMode::exact;
  else if (mode == "mc") base.mode = NullMode::monte_carlo;
  else throw ConfigError("--null-mode must be exact or mc");
  base.shifts = shifts;

  std::vector<Trace> traces;
  std::vector<std::string> warnings;
  for (const auto& f : files) {
    auto r = read_traces(f);
    for (auto& t : r.traces) traces.push_back(std::move(t));
    for (auto& w : r.warnings) warnings.push_back(std::move(w));
  }

  // Each trace gets its own Monte Carlo stream keyed by its position, so the
  // output does not depend on scheduling.
  std::vector<std::optional<MetricsReport>> reports(traces.size());
  std::vector<std::string> errors(traces.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < traces.size();) {
      NullOptions opts = base;
      opts.seed = SeededRng(seed).fork(i).next_u64();
      try {
        reports[i] = evaluate_trace(traces[i], opts);
      } catch (const std::exception& e) {
        errors[i] = "trace " + traces[i].id + ": skipped: " + e.what();
      }
    }
  };
  if (workers == 0) workers = default_workers();
  workers = std::max<std::size_t>(1, std::min(workers, traces.size()));
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
  }

  std::vector<MetricsReport> rows;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    if (reports[i]) rows.push_back(*reports[i]);
    if (!errors[i].empty()) warnings.push_back(errors[i]);
  }
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  if (rows.empty()) throw std::runtime_error("no trace could be evaluated");
  rows.push_back(aggregate(rows));

  prepare_out_dir(out);
  Manifest m;
  m.command = "trace-eval";
  m.config = {{"null-mode", mode}, {"mc-shifts", std::to_string(shifts)},
              {"null-seed", std::to_string(seed)}};
  for (const auto& f : files) m.notes.push_back("input: " + f);
  if (!warnings.empty()) m.notes.push_back(std::to_string(warnings.size()) + " record(s) skipped");
  std::string text;
  for (const auto& [k, v] : m.config) text += k + "=" + v + "\n";
  m.config_hash = fnv1a_hex(text);
  write_artifact(out, "metrics.csv", to_text(write_metrics_csv, std::span<const MetricsReport>(rows)), m);
  write_manifest(out / "manifest.json", m);
  const auto& all = rows.back();
  std::cout << all.count << " trace(s): B " << csv_number(all.B) << " C_emp " << csv_number(all.c_emp)
            << "\n";
  return warnings.empty() ? kOk : kPartial;
}

int cmd_report(const std::string& log_path, const fs::path& out) {
  const auto logs = read_train_log_csv(log_path);
  if (logs.empty()) throw std::runtime_error(log_path + ": no rows");
  prepare_out_dir(out);
  Manifest m;
  m.command = "report";
  m.notes.push_back("input: " + log_path);
  write_artifact(out, "curves.csv", to_text(write_curves_csv, sweep_curves(logs)), m);
  write_artifact(out, "summary.csv", to_text(write_summary_csv, sweep_summary(logs)), m);
  write_manifest(out / "manifest.json", m);
  std::cout << "summarised " << logs.size() << " run(s)\n";
  return kOk;
}

int cmd_selftest(bool quick) {
  using namespace chunklab::verify;
  std::vector<CheckResult> all;
  auto add = [&all](std::vector<CheckResult> v) {
    for (auto& c : v) {
      std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
      all.push_back(std::move(c));
    }
  };
  add(op_gradient_suite());
  add(composite_gradient_suite());
  add(metric_closed_form_suite());
  add(ratio_loss_suite());
  add(cab_loss_suite());
  add(oracle_reconstruction_suite());
  add(null_calibration_suite(quick ? 0.1 : 1.0));
  const auto failed = std::count_if(all.begin(), all.end(), [](const auto& c) { return !c.passed; });
  std::cout << all.size() - failed << "/" << all.size() << " checks passed\n";
  return failed ? kNumerical : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chunklab: dynamic chunking experiments and boundary metrics"};
  app.require_subcommand(1);

  ConfigFlags synth_flags, train_flags, sweep_flags;
  std::string out_dir;
  std::size_t samples = 1, workers = 0, shifts = 512;
  std::uint64_t null_seed = 0;
  std::string null_mode = "exact", log_path;
  std::vector<std::string> files, only;
  bool quick = false;

  auto* synth = app.add_subcommand("synth-gen", "write synthetic change-point samples (SMB1)");
  synth_flags.attach(synth);
  synth->add_option("--out-dir", out_dir, "output directory")->required();
  synth->add_option("--samples", samples, "number of sequences")->check(CLI::PositiveNumber);

  auto* train = app.add_subcommand("train", "train one configuration over its seeds");
  train_flags.attach(train);
  train->add_option("--out-dir", out_dir, "output directory")->required();
  train->add_option("--workers", workers, "parallel runs (0: CHUNKLAB_WORKERS or all cores)");

  auto* sweep = app.add_subcommand("sweep", "chunker x smoothing comparison over seeds");
  sweep_flags.attach(sweep);
  sweep->add_option("--out-dir", out_dir, "output directory")->required();
  sweep->add_option("--workers", workers, "parallel runs (0: CHUNKLAB_WORKERS or all cores)");
  sweep->add_option("--variants", only, "subset, e.g. cos+byte sig+byte")->delimiter(',');

  auto* trace = app.add_subcommand("trace-eval", "boundary metrics for JSONL traces");
  trace->add_option("files", files, "trace files")->required()->check(CLI::ExistingFile);
  trace->add_option("--null-mode", null_mode, "exact|mc")->check(CLI::IsMember({"exact", "mc"}));
  trace->add_option("--mc-shifts", shifts, "rotations sampled in mc mode")->check(CLI::Range(2, 1 << 30));
  trace->add_option("--null-seed", null_seed, "seed for mc rotations");
  trace->add_option("--out-dir", out_dir, "output directory")->required();
  trace->add_option("--workers", workers, "parallel traces (0: CHUNKLAB_WORKERS or all cores)");

  auto* report = app.add_subcommand("report", "curves and summary from a training log CSV");
  report->add_option("--log", log_path, "train_log.csv")->required()->check(CLI::ExistingFile);
  report->add_option("--out-dir", out_dir, "output directory")->required();

  auto* selftest = app.add_subcommand("selftest", "gradient and metric oracle suites");
  selftest->add_flag("--quick", quick, "fewer null calibration trials");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*synth) return cmd_synth_gen(synth_flags, out_dir, samples);
    if (*train) return cmd_train(train_flags, out_dir, workers);
    if (*sweep) return cmd_sweep(sweep_flags, out_dir, workers, only);
    if (*trace) return cmd_trace_eval(files, null_mode, shifts, null_seed, out_dir, workers);
    if (*report) return cmd_report(log_path, out_dir);
    if (*selftest) return cmd_selftest(quick);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
