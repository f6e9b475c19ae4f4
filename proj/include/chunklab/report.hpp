#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "chunklab/config.hpp"
#include "chunklab/metrics.hpp"
#include "chunklab/synthetic.hpp"
#include "chunklab/trainer.hpp"

namespace chunklab {

// ---- trace files -----------------------------------------------------------
//
// JSON lines. Lines starting with '#' are comments. Each record:
//   {"id": "...", "h": [nats...], "b": [0/1...], "domain": "..."}
// h[t] is the surprisal of the target predicted from position t (h_t = s_{t+1}).
// The last position has no next target: h may either be one entry shorter
// than b or end in null; either way that position is excluded from scoring.

extern const char* const kTraceFormatHeader;

struct TraceReadResult {
  std::vector<Trace> traces;
  std::vector<std::string> warnings;  // one per skipped record
};

// Throws std::runtime_error when the file cannot be read or holds no records
// at all (comments only / empty). Malformed records are skipped with a warning.
TraceReadResult read_traces(const std::filesystem::path& path);
TraceReadResult parse_traces(std::istream& is, const std::string& source);
void write_traces(std::ostream& os, std::span<const Trace> traces);

// ---- CSV -------------------------------------------------------------------

// "NA" for undefined values; otherwise the shortest text that reads back exactly.
std::string csv_number(double v);

// id,T,K,C_emp,B,Z_B,H_g,R_cusum,Z_runs,bpb0
void write_metrics_csv(std::ostream& os, std::span<const MetricsReport> rows);

// variant,seed,step,L_mse,L_ratio,L_total,C_emp,accuracy,f1
void write_train_log_csv(std::ostream& os, std::span<const TrainLog> logs);

struct CurvePoint {
  std::string variant;
  std::size_t step = 0;
  std::size_t seeds = 0;
  double mse_median = 0, mse_q25 = 0, mse_q75 = 0;
  double c_emp_median = 0, c_emp_q25 = 0, c_emp_q75 = 0;
};

struct VariantSummary {
  std::string variant;
  std::size_t seeds = 0;
  std::size_t aborted = 0;
  double final_mse_median = 0, final_mse_q25 = 0, final_mse_q75 = 0;
  double final_c_emp_median = 0;
  double final_accuracy_median = 0;
  double final_f1_median = 0;
};

// Linear-interpolated quantile (the numpy default); q in [0, 1].
double quantile(std::vector<double> values, double q);

// Per (variant, step) statistics across seeds, variants sorted by label, so
// the result does not depend on the order of the logs.
std::vector<CurvePoint> sweep_curves(std::span<const TrainLog> logs);
// One row per variant from each seed's final (evaluation) row. `aborted`
// holds the RunAborted messages; each starts with the variant label.
std::vector<VariantSummary> sweep_summary(std::span<const TrainLog> logs,
                                          std::span<const std::string> aborted = {});

void write_curves_csv(std::ostream& os, std::span<const CurvePoint> rows);
void write_summary_csv(std::ostream& os, std::span<const VariantSummary> rows);

// Inverse of write_train_log_csv, used by `report`.
std::vector<TrainLog> read_train_log_csv(const std::filesystem::path& path);

// ---- JSON ------------------------------------------------------------------

struct Manifest {
  std::string command;
  std::string config_hash;
  std::map<std::string, std::string> config;  // canonical key=value pairs
  std::vector<std::string> artifacts;         // relative to the out dir
  std::vector<std::string> notes;
};

Manifest make_manifest(const std::string& command, const ExperimentConfig& cfg);
void write_manifest(const std::filesystem::path& path, const Manifest& m);

// Human-readable copy of the SMB1 header.
void write_dataset_sidecar(const std::filesystem::path& path, const SynthConfig& cfg,
                           std::size_t samples);

// Writes text to out_dir/name and records name in the manifest.
void write_artifact(const std::filesystem::path& out_dir, const std::string& name,
                    const std::string& text, Manifest& m);

}  // namespace chunklab
