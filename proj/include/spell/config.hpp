#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spell/guidance.hpp"
#include "spell/mixture.hpp"
#include "spell/schedule.hpp"

namespace spell {

struct ShieldSourceConfig {
  enum class Kind { kNone, kInline, kIndexFile, kSamplesFile };
  Kind kind = Kind::kNone;
  std::vector<Eigen::VectorXd> inline_centers;
  std::string index_file;
  std::string samples_file;
  int n_probe = 2;
  // Cells for indices built by this config; 0 means ceil(sqrt(N)).
  int n_cells = 0;
  std::uint64_t index_seed = 1;
  // Route static lookups through an in-memory index built over the inline or
  // sampled centers (an index file always routes through itself).
  bool use_index = false;
  // Append each batch's final samples to the shield set for later batches.
  bool accumulate = false;
};

struct MetricsConfig {
  bool enabled = true;
  int k_neighbors = 3;
  int reference_samples = 2000;
  std::uint64_t reference_seed = 9001;
  std::optional<double> vendi_bandwidth;  // unset = cosine kernel
};

// Empty axes fall back to the base config value, so the sweep grid is the
// product of the effective axis lengths.
struct SweepAxes {
  std::vector<double> radius;
  std::vector<double> lambda;
  std::vector<double> gamma;
  std::vector<int> n_probe;

  bool any() const {
    return !radius.empty() || !lambda.empty() || !gamma.empty() || !n_probe.empty();
  }
};

struct ExperimentConfig {
  // [run]
  std::uint64_t seed = 0;
  int batch = 1;
  int n_batches = 1;
  std::optional<int> label;
  double gamma = 1.0;
  double pg_bandwidth = 0.0;
  bool trace = true;
  bool store_xhat = false;
  // [schedule]
  NoiseSchedule schedule;
  int n_steps = 50;
  // [mixture]
  int dim = 0;
  std::vector<MixtureComponent> components;
  // [spell]
  SpellConfig spell;
  // [shields]
  ShieldSourceConfig shields;
  // [metrics]
  MetricsConfig metrics;
  // [sweep]
  SweepAxes sweep;

  GaussianMixture mixture() const { return GaussianMixture(components); }
  void validate() const;
};

// Parses the experiment file format: '[section]' headers, 'key: value' lines,
// '#' comments. `source` names the input in diagnostics; relative referenced
// paths resolve against base_dir.
ExperimentConfig parse_config_text(std::string_view text, const std::string& source,
                                   const std::string& base_dir);
ExperimentConfig load_config(const std::string& path);

// Canonical serialization: fixed section and key order, shortest round-trip
// numbers. Parsing the output reproduces the config exactly.
std::string canonical_config_text(const ExperimentConfig& config);

std::uint64_t fnv1a(std::string_view text);
std::string hash_hex(std::uint64_t value);

// Hash over the fields two comparable runs must share: seed, schedule,
// mixture, grid size, batch layout, guidance, and the repulsion baseline.
std::string compatibility_hash(const ExperimentConfig& config);

}  // namespace spell
