#include "chunklab/config.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace chunklab {

std::string to_string(ChunkerKind k) { return k == ChunkerKind::cosine ? "cosine" : "sigmoid"; }
std::string to_string(Smoothing s) { return s == Smoothing::chunk ? "chunk" : "byte"; }
std::string to_string(Fusion f) {
  switch (f) {
    case Fusion::none: return "none";
    case Fusion::residual: return "residual";
    case Fusion::confidence_ste: return "confidence_ste";
  }
  return "none";
}

ChunkerKind parse_chunker(const std::string& s) {
  if (s == "cosine" || s == "cos") return ChunkerKind::cosine;
  if (s == "sigmoid" || s == "sig") return ChunkerKind::sigmoid;
  throw ConfigError("unknown chunker '" + s + "' (cosine|sigmoid)");
}

Smoothing parse_smoothing(const std::string& s) {
  if (s == "chunk") return Smoothing::chunk;
  if (s == "byte") return Smoothing::byte;
  throw ConfigError("unknown smoothing '" + s + "' (chunk|byte)");
}

Fusion parse_fusion(const std::string& s) {
  if (s == "none") return Fusion::none;
  if (s == "residual") return Fusion::residual;
  if (s == "confidence_ste") return Fusion::confidence_ste;
  throw ConfigError("unknown fusion '" + s + "' (none|residual|confidence_ste)");
}

void ExperimentConfig::validate() const {
  if (!(c_tar > 1.0)) throw ConfigError("c-tar must be > 1");
  if (!(c_max > 1.0)) throw ConfigError("c-max must be > 1");
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (d_h < 1) throw ConfigError("d-h must be >= 1");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (!(adamw.lr >= 0)) throw ConfigError("lr must be >= 0");
  if (weights.mse < 0 || weights.ratio < 0 || weights.cab < 0)
    throw ConfigError("loss weights must be >= 0");
  if (weights.cab > 0)
    throw ConfigError("cab loss needs next-target probabilities, which the synthetic task lacks");
  if (fusion != Fusion::none && d_h != synth.d_z)
    throw ConfigError("fusion requires d-h == d-z");
  try {
    synth_config().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

SynthConfig ExperimentConfig::synth_config() const {
  SynthConfig s = synth;
  if (s.boundary_rate <= 0.0) s.boundary_rate = 1.0 / c_tar;
  return s;
}

std::string ExperimentConfig::variant() const {
  return std::string(chunker == ChunkerKind::cosine ? "cos" : "sig") + "+" + to_string(smoothing);
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  errno = 0;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || errno)
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  return x;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  char* end = nullptr;
  errno = 0;
  if (!v.empty() && v[0] == '-') throw ConfigError(key + ": expected a non-negative integer");
  const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size() || errno)
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  throw ConfigError(key + ": expected true|false, got '" + v + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

#define DOUBLE_KEY(NAME, HELP, FIELD)                                                   \
  ConfigKey {                                                                           \
    NAME, HELP, [](ExperimentConfig& c, const std::string& v) { c.FIELD = parse_double(NAME, v); }, \
        [](const ExperimentConfig& c) { return fmt_double(c.FIELD); }                   \
  }
#define SIZE_KEY(NAME, HELP, FIELD)                                                    \
  ConfigKey {                                                                          \
    NAME, HELP,                                                                        \
        [](ExperimentConfig& c, const std::string& v) {                                \
          c.FIELD = static_cast<std::size_t>(parse_u64(NAME, v));                      \
        },                                                                             \
        [](const ExperimentConfig& c) { return std::to_string(c.FIELD); }              \
  }

}  // namespace

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto dash = item.find('-');
    if (dash != std::string::npos && dash > 0) {
      const auto lo = parse_u64("seeds", item.substr(0, dash));
      const auto hi = parse_u64("seeds", item.substr(dash + 1));
      if (hi < lo) throw ConfigError("seeds: empty range '" + item + "'");
      for (auto v = lo; v <= hi; ++v) out.push_back(v);
    } else {
      out.push_back(parse_u64("seeds", item));
    }
  }
  if (out.empty()) throw ConfigError("seeds: empty list");
  return out;
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"chunker", "cosine|sigmoid",
       [](ExperimentConfig& c, const std::string& v) { c.chunker = parse_chunker(v); },
       [](const ExperimentConfig& c) { return to_string(c.chunker); }},
      {"smoothing", "chunk|byte",
       [](ExperimentConfig& c, const std::string& v) { c.smoothing = parse_smoothing(v); },
       [](const ExperimentConfig& c) { return to_string(c.smoothing); }},
      {"fusion", "none|residual|confidence_ste",
       [](ExperimentConfig& c, const std::string& v) { c.fusion = parse_fusion(v); },
       [](const ExperimentConfig& c) { return to_string(c.fusion); }},
      DOUBLE_KEY("c-tar", "target compression ratio", c_tar),
      DOUBLE_KEY("c-max", "compression cap enforced by the min-boundary guard", c_max),
      {"min-boundary-guard", "enable the compression cap",
       [](ExperimentConfig& c, const std::string& v) {
         c.min_boundary_guard = parse_bool("min-boundary-guard", v);
       },
       [](const ExperimentConfig& c) { return std::string(c.min_boundary_guard ? "true" : "false"); }},
      SIZE_KEY("steps", "optimisation steps per run", steps),
      SIZE_KEY("d-h", "encoder width", d_h),
      DOUBLE_KEY("lr", "AdamW learning rate", adamw.lr),
      DOUBLE_KEY("beta1", "AdamW beta1", adamw.beta1),
      DOUBLE_KEY("beta2", "AdamW beta2", adamw.beta2),
      DOUBLE_KEY("adam-eps", "AdamW epsilon", adamw.eps),
      DOUBLE_KEY("weight-decay", "AdamW decoupled weight decay", adamw.weight_decay),
      {"seeds", "comma list or ranges, e.g. 1-5",
       [](ExperimentConfig& c, const std::string& v) { c.seeds = parse_seed_list(v); },
       [](const ExperimentConfig& c) {
         std::string s;
         for (std::size_t i = 0; i < c.seeds.size(); ++i)
           s += (i ? "," : "") + std::to_string(c.seeds[i]);
         return s;
       }},
      DOUBLE_KEY("w-mse", "weight of the reconstruction term", weights.mse),
      {"mse-per-element", "scale the reconstruction term by 1/d-z in the objective",
       [](ExperimentConfig& c, const std::string& v) {
         c.mse_per_element = parse_bool("mse-per-element", v);
       },
       [](const ExperimentConfig& c) { return std::string(c.mse_per_element ? "true" : "false"); }},
      DOUBLE_KEY("w-ratio", "weight of the ratio loss", weights.ratio),
      DOUBLE_KEY("w-cab", "weight of the CAB loss", weights.cab),
      SIZE_KEY("T", "sequence length", synth.T),
      SIZE_KEY("d-z", "latent width", synth.d_z),
      SIZE_KEY("d-x", "observation width", synth.d_x),
      DOUBLE_KEY("noise", "observation noise std", synth.noise),
      {"boundary-rate", "change-point probability; 0 means 1/c-tar",
       [](ExperimentConfig& c, const std::string& v) {
         c.synth.boundary_rate = parse_double("boundary-rate", v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.synth.boundary_rate); }},
      {"data-seed", "seed for synth-gen",
       [](ExperimentConfig& c, const std::string& v) { c.synth.seed = parse_u64("data-seed", v); },
       [](const ExperimentConfig& c) { return std::to_string(c.synth.seed); }},
      DOUBLE_KEY("init-std", "std of the sigmoid chunker weights at init", init_std),
  };
  return keys;
}

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : config_keys())
    if (k.name == key) {
      k.set(cfg, value);
      return;
    }
  throw ConfigError("unknown config key '" + key + "'");
}

ExperimentConfig parse_config_text(const std::string& text, ExperimentConfig cfg) {
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    apply_setting(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str(), std::move(base));
}

std::string to_config_text(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& k : config_keys()) out += k.name + "=" + k.get(cfg) + "\n";
  return out;
}

std::string config_hash(const ExperimentConfig& cfg) { return fnv1a_hex(to_config_text(cfg)); }

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace chunklab
