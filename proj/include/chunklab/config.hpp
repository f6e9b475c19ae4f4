#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "chunklab/adamw.hpp"
#include "chunklab/losses.hpp"
#include "chunklab/synthetic.hpp"

namespace chunklab {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ChunkerKind { cosine, sigmoid };
enum class Smoothing { chunk, byte };
enum class Fusion { none, residual, confidence_ste };

std::string to_string(ChunkerKind k);
std::string to_string(Smoothing s);
std::string to_string(Fusion f);
ChunkerKind parse_chunker(const std::string& s);
Smoothing parse_smoothing(const std::string& s);
Fusion parse_fusion(const std::string& s);

struct ExperimentConfig {
  ChunkerKind chunker = ChunkerKind::cosine;
  Smoothing smoothing = Smoothing::byte;
  // The synthetic pipeline compares the expansion to z directly; residual
  // fusion adds encoder features first and requires d_h == d_z.
  Fusion fusion = Fusion::none;
  double c_tar = 4.0;
  double c_max = 8.0;
  bool min_boundary_guard = true;
  std::size_t steps = 1500;
  std::size_t d_h = 128;
  AdamWConfig adamw;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  LossWeights weights;
  // Divide the reconstruction term by d_z inside the objective (per-element
  // mean). The logged L_mse keeps the per-position sum.
  bool mse_per_element = true;
  // boundary_rate <= 0 means 1 / c_tar.
  SynthConfig synth = [] {
    SynthConfig s;
    s.boundary_rate = 0.0;
    return s;
  }();
  double init_std = 0.02;  // sigmoid chunker weight init

  void validate() const;
  // Synthetic config with the boundary rate resolved.
  SynthConfig synth_config() const;
  // Variant label such as "cos+byte".
  std::string variant() const;
};

// key=value text, one per line, '#' comments. Keys match the CLI long flags.
struct ConfigKey {
  std::string name;
  std::string help;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<ConfigKey>& config_keys();

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);
ExperimentConfig parse_config_text(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});
// Canonical key=value dump in table order.
std::string to_config_text(const ExperimentConfig& cfg);
// FNV-1a 64 as 16 hex digits.
std::string fnv1a_hex(const std::string& text);
// fnv1a_hex of the canonical text.
std::string config_hash(const ExperimentConfig& cfg);

std::vector<std::uint64_t> parse_seed_list(const std::string& s);

}  // namespace chunklab
