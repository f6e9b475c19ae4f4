#include "chunklab/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace chunklab {

using nlohmann::json;

const char* const kTraceFormatHeader =
    "# chunklab trace v1: one JSON object per line {id, h, b, domain?}; "
    "h in nats, aligned h_t = s_{t+1} (surprisal of the target predicted from t); "
    "b_t = 1 starts a chunk at t; last h may be omitted or null";

namespace {

Trace parse_trace_record(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("record is not an object");
  Trace t;
  if (!j.contains("id") || !j["id"].is_string()) throw std::invalid_argument("missing string id");
  t.id = j["id"].get<std::string>();
  if (!j.contains("h") || !j["h"].is_array()) throw std::invalid_argument("missing array h");
  if (!j.contains("b") || !j["b"].is_array()) throw std::invalid_argument("missing array b");
  for (const auto& v : j["b"]) {
    if (v.is_boolean()) {
      t.b.push_back(v.get<bool>() ? 1 : 0);
    } else if (v.is_number_integer() || v.is_number_unsigned()) {
      const auto x = v.get<long long>();
      if (x != 0 && x != 1) throw std::invalid_argument("b entries must be 0 or 1");
      t.b.push_back(static_cast<std::uint8_t>(x));
    } else {
      throw std::invalid_argument("b entries must be 0 or 1");
    }
  }
  const auto& h = j["h"];
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (h[i].is_null()) {
      if (i + 1 != h.size()) throw std::invalid_argument("null h is only allowed at the end");
      t.last_h_absent = true;
      continue;
    }
    if (!h[i].is_number()) throw std::invalid_argument("h entries must be numbers");
    t.h.push_back(h[i].get<double>());
  }
  if (!t.last_h_absent && t.h.size() + 1 == t.b.size()) t.last_h_absent = true;
  if (j.contains("domain") && !j["domain"].is_null()) {
    if (!j["domain"].is_string()) throw std::invalid_argument("domain must be a string");
    t.domain = j["domain"].get<std::string>();
  }
  t.validate();
  return t;
}

}  // namespace

TraceReadResult parse_traces(std::istream& is, const std::string& source) {
  TraceReadResult out;
  std::string line;
  std::size_t lineno = 0, records = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    ++records;
    try {
      out.traces.push_back(parse_trace_record(json::parse(line)));
    } catch (const std::exception& e) {
      out.warnings.push_back(source + ":" + std::to_string(lineno) + ": skipped: " + e.what());
    }
  }
  if (records == 0) throw std::runtime_error(source + ": no trace records");
  return out;
}

TraceReadResult read_traces(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return parse_traces(is, path.string());
}

void write_traces(std::ostream& os, std::span<const Trace> traces) {
  os << kTraceFormatHeader << '\n';
  for (const auto& t : traces) {
    json j;
    j["id"] = t.id;
    json h = json::array();
    for (double v : t.h) h.push_back(v);
    if (t.last_h_absent) h.push_back(nullptr);
    j["h"] = std::move(h);
    json b = json::array();
    for (auto v : t.b) b.push_back(int(v));
    j["b"] = std::move(b);
    if (t.domain) j["domain"] = *t.domain;
    os << j.dump() << '\n';
  }
}

std::string csv_number(double v) {
  if (!std::isfinite(v)) return "NA";
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? csv_number(*v) : "NA"; }

// Labels are written bare; reject anything that would need quoting.
const std::string& csv_label(const std::string& s) {
  if (s.find_first_of(",\"\n\r") != std::string::npos)
    throw std::invalid_argument("label not CSV-safe: " + s);
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void write_metrics_csv(std::ostream& os, std::span<const MetricsReport> rows) {
  os << "id,T,K,C_emp,B,Z_B,H_g,R_cusum,Z_runs,bpb0\n";
  for (const auto& r : rows)
    os << csv_label(r.id) << ',' << r.T << ',' << r.K << ',' << csv_number(r.c_emp) << ','
       << csv_number(r.B) << ',' << opt(r.z_b) << ',' << opt(r.h_g) << ','
       << csv_number(r.r_cusum) << ',' << opt(r.z_runs) << ',' << csv_number(r.bpb0) << '\n';
}

void write_train_log_csv(std::ostream& os, std::span<const TrainLog> logs) {
  os << "variant,seed,step,L_mse,L_ratio,L_total,C_emp,accuracy,f1\n";
  for (const auto& log : logs)
    for (const auto& r : log.rows)
      os << csv_label(log.variant) << ',' << log.seed << ',' << r.step << ','
         << csv_number(r.l_mse) << ',' << csv_number(r.l_ratio) << ',' << csv_number(r.l_total)
         << ',' << csv_number(r.c_emp) << ',' << csv_number(r.accuracy) << ','
         << csv_number(r.f1) << '\n';
}

std::vector<TrainLog> read_train_log_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(is, line) || line.rfind("variant,seed,step,", 0) != 0)
    throw std::runtime_error(path.string() + ": not a training log CSV");
  std::vector<TrainLog> logs;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 9) throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected 9 columns");
    auto num = [&](const std::string& s) {
      if (s == "NA") return std::nan("");
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": bad number");
      return v;
    };
    const auto seed = std::stoull(c[1]);
    if (logs.empty() || logs.back().variant != c[0] || logs.back().seed != seed)
      logs.push_back(TrainLog{c[0], seed, {}});
    LogRow r;
    r.step = std::stoull(c[2]);
    r.l_mse = num(c[3]);
    r.l_ratio = num(c[4]);
    r.l_total = num(c[5]);
    r.c_emp = num(c[6]);
    r.accuracy = num(c[7]);
    r.f1 = num(c[8]);
    logs.back().rows.push_back(r);
  }
  return logs;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

std::vector<std::string> variant_order(std::span<const TrainLog> logs,
                                       std::span<const std::string> aborted = {}) {
  std::vector<std::string> order;
  auto add = [&order](const std::string& v) {
    if (std::find(order.begin(), order.end(), v) == order.end()) order.push_back(v);
  };
  for (const auto& l : logs) add(l.variant);
  for (const auto& a : aborted) add(a.substr(0, a.find(' ')));
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace

std::vector<CurvePoint> sweep_curves(std::span<const TrainLog> logs) {
  std::vector<CurvePoint> out;
  for (const auto& v : variant_order(logs)) {
    std::map<std::size_t, std::pair<std::vector<double>, std::vector<double>>> by_step;
    for (const auto& l : logs)
      if (l.variant == v)
        for (const auto& r : l.rows) {
          by_step[r.step].first.push_back(r.l_mse);
          by_step[r.step].second.push_back(r.c_emp);
        }
    for (const auto& [step, vals] : by_step) {
      CurvePoint p;
      p.variant = v;
      p.step = step;
      p.seeds = vals.first.size();
      p.mse_median = quantile(vals.first, 0.5);
      p.mse_q25 = quantile(vals.first, 0.25);
      p.mse_q75 = quantile(vals.first, 0.75);
      p.c_emp_median = quantile(vals.second, 0.5);
      p.c_emp_q25 = quantile(vals.second, 0.25);
      p.c_emp_q75 = quantile(vals.second, 0.75);
      out.push_back(p);
    }
  }
  return out;
}

std::vector<VariantSummary> sweep_summary(std::span<const TrainLog> logs,
                                          std::span<const std::string> aborted) {
  std::vector<VariantSummary> out;
  for (const auto& v : variant_order(logs, aborted)) {
    VariantSummary s;
    s.variant = v;
    std::vector<double> mse, c, acc, f1;
    for (const auto& l : logs)
      if (l.variant == v && !l.rows.empty()) {
        mse.push_back(l.rows.back().l_mse);
        c.push_back(l.rows.back().c_emp);
        acc.push_back(l.rows.back().accuracy);
        f1.push_back(l.rows.back().f1);
      }
    for (const auto& a : aborted)
      if (a.substr(0, a.find(' ')) == v) ++s.aborted;
    s.seeds = mse.size();
    if (!mse.empty()) {
      s.final_mse_median = quantile(mse, 0.5);
      s.final_mse_q25 = quantile(mse, 0.25);
      s.final_mse_q75 = quantile(mse, 0.75);
      s.final_c_emp_median = quantile(c, 0.5);
      s.final_accuracy_median = quantile(acc, 0.5);
      s.final_f1_median = quantile(f1, 0.5);
    } else {
      s.final_mse_median = s.final_mse_q25 = s.final_mse_q75 = std::nan("");
      s.final_c_emp_median = s.final_accuracy_median = s.final_f1_median = std::nan("");
    }
    out.push_back(s);
  }
  return out;
}

void write_curves_csv(std::ostream& os, std::span<const CurvePoint> rows) {
  os << "variant,step,seeds,mse_median,mse_q25,mse_q75,c_emp_median,c_emp_q25,c_emp_q75\n";
  for (const auto& p : rows)
    os << csv_label(p.variant) << ',' << p.step << ',' << p.seeds << ',' << csv_number(p.mse_median)
       << ',' << csv_number(p.mse_q25) << ',' << csv_number(p.mse_q75) << ','
       << csv_number(p.c_emp_median) << ',' << csv_number(p.c_emp_q25) << ','
       << csv_number(p.c_emp_q75) << '\n';
}

void write_summary_csv(std::ostream& os, std::span<const VariantSummary> rows) {
  os << "variant,seeds,aborted,final_mse_median,final_mse_q25,final_mse_q75,"
        "final_c_emp_median,final_accuracy_median,final_f1_median\n";
  for (const auto& s : rows)
    os << csv_label(s.variant) << ',' << s.seeds << ',' << s.aborted << ','
       << csv_number(s.final_mse_median) << ',' << csv_number(s.final_mse_q25) << ','
       << csv_number(s.final_mse_q75) << ',' << csv_number(s.final_c_emp_median) << ','
       << csv_number(s.final_accuracy_median) << ',' << csv_number(s.final_f1_median) << '\n';
}

Manifest make_manifest(const std::string& command, const ExperimentConfig& cfg) {
  Manifest m;
  m.command = command;
  m.config_hash = config_hash(cfg);
  for (const auto& k : config_keys()) m.config[k.name] = k.get(cfg);
  return m;
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  json j;
  j["command"] = m.command;
  j["config_hash"] = m.config_hash;
  j["config"] = m.config;
  j["artifacts"] = m.artifacts;
  if (!m.notes.empty()) j["notes"] = m.notes;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

void write_dataset_sidecar(const std::filesystem::path& path, const SynthConfig& cfg,
                           std::size_t samples) {
  json j;
  j["magic"] = "SMB1";
  j["T"] = cfg.T;
  j["d_z"] = cfg.d_z;
  j["d_x"] = cfg.d_x;
  j["noise"] = cfg.noise;
  j["boundary_rate"] = cfg.boundary_rate;
  j["seed"] = cfg.seed;
  j["samples"] = samples;
  j["layout"] = "per sample: f32 z[T][d_z], f32 x[T][d_x], b_star bits packed LSB-first";
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

void write_artifact(const std::filesystem::path& out_dir, const std::string& name,
                    const std::string& text, Manifest& m) {
  const auto path = out_dir / name;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
  if (!os) throw std::runtime_error("failed writing " + path.string());
  m.artifacts.push_back(name);
}

}  // namespace chunklab
