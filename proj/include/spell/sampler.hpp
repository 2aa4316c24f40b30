#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "spell/guidance.hpp"
#include "spell/mixture.hpp"
#include "spell/schedule.hpp"
#include "spell/shield_index.hpp"

namespace spell {

struct TraceRecord {
  int step = 0;
  double t = 0.0;
  int traj = 0;
  // Norm of the score-space correction actually applied, overcompensation
  // included; exactly zero on inactive steps.
  double delta_norm = 0.0;
  // Norm of the uncorrected score at the same point.
  double score_norm = 0.0;
  // Static shields plus repelling batch peers.
  int active_count = 0;
  bool degenerate = false;
  // Static shield ids only (index ids first, extra set after), ascending.
  std::vector<int> shield_ids;
};

struct TrajectoryTrace {
  int n_steps = 0;
  int batch = 0;
  std::vector<TraceRecord> records;  // step-major
  bool store_xhat = false;
  // Pre-correction denoised predictions per step, batch x dim; only filled
  // when store_xhat is set (memory-heavy, off by default).
  std::vector<Eigen::MatrixXd> xhat_snapshots;

  const TraceRecord& at(int step, int traj) const {
    return records[static_cast<std::size_t>(step) * batch + traj];
  }
};

struct SparsityBin {
  double t_hi = 0.0;  // largest record time in the bin
  double t_lo = 0.0;
  int records = 0;
  int active = 0;
  double active_fraction = 0.0;
  double mean_ratio = 0.0;  // delta_norm / score_norm over active records
  double max_ratio = 0.0;
};

struct SparsitySummary {
  std::vector<SparsityBin> bins;
  // Time of the last active step per trajectory; repellency "finishes early"
  // when this is large (reverse time runs from 1 to 0). NaN when never active.
  std::vector<double> finish_time;
};

SparsitySummary sparsity_summary(const TrajectoryTrace& trace, int n_bins = 10);

// Static shields a run repels from: an optional prebuilt approximate index
// plus a plain set scanned exhaustively (inline shields, or samples
// accumulated across batches). The union is also the reference set for the
// violation check, which never goes through the index.
struct ShieldSources {
  const IvfIndex* index = nullptr;
  int n_probe = 2;
  Eigen::MatrixXd extra_centers;  // zero rows when unused

  Eigen::MatrixXd all_centers(int dim) const;
};

struct RunConfig {
  NoiseSchedule schedule;
  TimeGrid grid;
  SpellConfig spell;
  std::optional<int> label;
  double gamma = 1.0;
  // Bandwidth for the kernel-repulsion baseline, applied to the score at the
  // noisy states on intermediate steps; 0 disables it.
  double pg_bandwidth = 0.0;
  int batch = 1;
  std::uint64_t seed = 0;
  // Global id of batch row 0. Noise streams are addressed by global
  // trajectory id, so multi-batch runs stay reproducible and a row's noise
  // never depends on the batch size.
  std::uint32_t trajectory_offset = 0;
  bool record_trace = true;
  bool store_xhat = false;
  Exec exec = Exec::kParallel;

  void validate(const GaussianMixture& mixture) const;
};

struct RunResult {
  Eigen::MatrixXd samples;  // batch x dim
  TrajectoryTrace trace;
  int violation_count = 0;       // samples strictly inside a shield
  double min_shield_distance = 0.0;  // +inf when there are no shields
};

// One reverse step of the whole batch from grid.times[step_index] to
// grid.times[step_index + 1]. Intermediate steps are Euler-Maruyama on the
// reverse SDE; the final step (destination time 0) lands exactly on the
// corrected denoised prediction and draws no noise.
void backward_step(Eigen::MatrixXd& states, const GaussianMixture& mixture,
                   const RunConfig& config, const ShieldSources& shields,
                   int step_index, TrajectoryTrace* trace);

// Full reverse run from standard normal initialization, plus the exhaustive
// post-hoc violation check against every shield.
RunResult generate(const GaussianMixture& mixture, const RunConfig& config,
                   const ShieldSources& shields);

}  // namespace spell
