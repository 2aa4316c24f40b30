#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "spell/config.hpp"
#include "spell/metrics.hpp"
#include "spell/rng.hpp"
#include "spell/sampler.hpp"

namespace spell {

// Bundled presets: "collapse" (mode-seeking guidance on an eight-mode ring,
// intra-batch repellency), "protection" (10^4 protected points behind an
// approximate index, n_probe sweep), "iterative" (sequential batches
// accumulating earlier outputs as shields).
ExperimentConfig make_scenario(const std::string& name);
const std::vector<std::string>& scenario_names();

// Rejection-thins draws from the mixture until `count` points with pairwise
// gaps strictly above min_gap are accepted; gives up past max_draws.
Eigen::MatrixXd poisson_thin(rng::Sequence& stream, const GaussianMixture& mixture,
                             int count, double min_gap, int max_draws);

struct RunArtifacts {
  Eigen::MatrixXd samples;  // all batches stacked, trajectory id = row
  std::vector<TraceRecord> trace_records;
  int n_steps = 0;
  long long violation_count = 0;
  double violation_rate = 0.0;
  double min_shield_distance = 0.0;
  double wall_ms = 0.0;  // generation only, excludes metrics and file output
  MetricsReport metrics;
  bool has_metrics = false;
};

// Runs every batch of the configured experiment and, unless out_dir is empty,
// writes samples.csv, trace.csv + active_shields.csv (when tracing),
// config.txt, metadata.json, and metrics.json (when metrics are enabled).
RunArtifacts run_experiment(const ExperimentConfig& config, const std::string& out_dir);

struct SweepRow {
  int point = 0;
  double radius = 0.0;
  double lambda = 1.0;
  double gamma = 1.0;
  int n_probe = 1;
  RunArtifacts artifacts;
};

// Cartesian product over the configured sweep axes (radius outermost, then
// lambda, gamma, n_probe); absent axes stay at the base config value. Each
// point runs in out_dir/point_NNN; sweep.csv summarizes one row per point.
std::vector<SweepRow> run_sweep(const ExperimentConfig& config, const std::string& out_dir);

struct TrajectoryDiff {
  int traj = 0;
  bool changed = false;
  double displacement = 0.0;
  int active_steps = 0;
  std::vector<int> shield_ids;  // static shields that intervened, ascending
};

struct ComparisonReport {
  std::vector<TrajectoryDiff> rows;
  int changed_count = 0;
};

// Per-trajectory diff of two runs with identical seed, schedule, mixture, and
// batch layout (checked through run metadata). Reads the repellency run's
// trace to attribute changes; writes comparison.csv to out_path when given.
ComparisonReport compare_runs(const std::string& baseline_dir, const std::string& repel_dir,
                              const std::string& out_path);

// Per-run time-binned activity tables (sparsity_<name>.csv), per-trajectory
// repellency finish times (finish_<name>.csv), and, for sweep directories,
// quality/diversity tradeoff tables (pareto_<name>.csv).
void emit_plot_data(const std::vector<std::string>& run_dirs, const std::string& out_dir);

// Builds the coarse-quantized index over the configured shield centers
// (inline or samples file) and saves it to out_path.
void build_index_from_config(const ExperimentConfig& config, const std::string& out_path);

}  // namespace spell
