#include "spell/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>

#include "spell/dps.hpp"
#include "spell/errors.hpp"
#include "spell/rng.hpp"

namespace spell {
namespace {

// Funnels exceptions out of parallel regions: the first failure is recorded
// and rethrown after the loop instead of escaping a worker thread.
class ErrorCollector {
 public:
  template <typename F>
  auto wrap(F fn) {
    return [this, fn](int i) {
      if (failed_.load(std::memory_order_relaxed)) return;
      try {
        fn(i);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(mutex_);
        if (!failed_.exchange(true)) message_ = e.what();
      }
    };
  }

  void rethrow() const {
    if (failed_.load()) throw NumericError(message_);
  }

 private:
  std::atomic<bool> failed_{false};
  std::mutex mutex_;
  std::string message_;
};

}  // namespace

SparsitySummary sparsity_summary(const TrajectoryTrace& trace, int n_bins) {
  if (n_bins < 1) throw ConfigError("sparsity summary: n_bins must be >= 1");
  SparsitySummary summary;
  summary.bins.assign(n_bins, {});
  summary.finish_time.assign(trace.batch,
                             std::numeric_limits<double>::quiet_NaN());
  if (trace.n_steps == 0) return summary;

  std::vector<double> ratio_sum(n_bins, 0.0);
  std::vector<int> ratio_count(n_bins, 0);
  std::vector<int> finish_step(trace.batch, -1);
  // Trajectory ids are global, so traces from offset batches rebase to 0.
  int traj_base = 0;
  if (!trace.records.empty()) {
    traj_base = trace.records.front().traj;
    for (const auto& rec : trace.records) traj_base = std::min(traj_base, rec.traj);
  }
  for (const auto& rec : trace.records) {
    const int bin = std::min(rec.step * n_bins / trace.n_steps, n_bins - 1);
    auto& b = summary.bins[bin];
    if (b.records == 0) {
      b.t_hi = rec.t;
      b.t_lo = rec.t;
    } else {
      b.t_hi = std::max(b.t_hi, rec.t);
      b.t_lo = std::min(b.t_lo, rec.t);
    }
    b.records += 1;
    if (rec.delta_norm > 0.0) {
      b.active += 1;
      const int row = rec.traj - traj_base;
      if (row >= 0 && row < trace.batch && rec.step >= finish_step[row]) {
        finish_step[row] = rec.step;
        summary.finish_time[row] = rec.t;
      }
      if (rec.score_norm > 0.0) {
        const double ratio = rec.delta_norm / rec.score_norm;
        ratio_sum[bin] += ratio;
        ratio_count[bin] += 1;
        b.max_ratio = std::max(b.max_ratio, ratio);
      }
    }
  }
  for (int k = 0; k < n_bins; ++k) {
    auto& b = summary.bins[k];
    b.active_fraction = b.records > 0 ? static_cast<double>(b.active) / b.records : 0.0;
    b.mean_ratio = ratio_count[k] > 0 ? ratio_sum[k] / ratio_count[k] : 0.0;
  }
  return summary;
}

Eigen::MatrixXd ShieldSources::all_centers(int dim) const {
  const auto index_rows = index ? index->size() : 0;
  const auto extra_rows = static_cast<int>(extra_centers.rows());
  Eigen::MatrixXd all(index_rows + extra_rows, dim);
  if (index) all.topRows(index_rows) = index->centers();
  if (extra_rows > 0) all.bottomRows(extra_rows) = extra_centers;
  return all;
}

void RunConfig::validate(const GaussianMixture& mixture) const {
  schedule.validate();
  spell.validate();
  const auto& times = grid.times;
  if (times.size() < 2) throw ConfigError("sampler: time grid needs >= 2 points");
  if (times.front() != 1.0 || times.back() != 0.0)
    throw ConfigError("sampler: time grid must run from 1 to 0");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] < times[i - 1]))
      throw ConfigError("sampler: time grid must be strictly decreasing");
  }
  if (batch < 1) throw ConfigError("sampler: batch must be >= 1");
  if (!(gamma >= 1.0)) throw ConfigError("sampler: gamma must be >= 1");
  if (gamma > 1.0 && !label)
    throw ConfigError("sampler: guidance scale above 1 needs a label");
  if (!(pg_bandwidth >= 0.0))
    throw ConfigError("sampler: pg_bandwidth must be >= 0");
  if (label) {
    const auto known = mixture.labels();
    if (std::find(known.begin(), known.end(), *label) == known.end())
      throw ConfigError("sampler: label not present in mixture");
  }
}

void backward_step(Eigen::MatrixXd& states, const GaussianMixture& mixture,
                   const RunConfig& config, const ShieldSources& shields,
                   int step_index, TrajectoryTrace* trace) {
  const auto& times = config.grid.times;
  const double t = times[step_index];
  const double t_next = times[step_index + 1];
  const double dt = t - t_next;
  const bool final_step = t_next == 0.0;
  const auto batch = static_cast<int>(states.rows());
  const int dim = mixture.dim();

  Eigen::MatrixXd scores(batch, dim);
  Eigen::MatrixXd xhats(batch, dim);
  ErrorCollector errors;
  for_each_index(batch, config.exec, errors.wrap([&](int b) {
    const Eigen::VectorXd x = states.row(b).transpose();
    ScoreEvaluation eval;
    if (config.label && config.gamma > 1.0) {
      eval = mixture.cfg_score(config.schedule, t, x, *config.label, config.gamma);
    } else {
      eval = mixture.score(config.schedule, t, x, config.label);
    }
    scores.row(b) = eval.score.transpose();
    xhats.row(b) = eval.denoised.transpose();
  }));
  errors.rethrow();
  if (trace != nullptr && trace->store_xhat) {
    trace->xhat_snapshots[step_index] = xhats;
  }

  const bool spell_on = config.spell.enabled();
  const bool want_static = spell_on && config.spell.mode != RepelMode::kIntraBatch;
  const bool want_batch = spell_on && config.spell.mode != RepelMode::kStatic;

  BatchDeltas batch_deltas;
  if (want_batch) {
    batch_deltas = intra_batch_deltas(xhats, config.spell.radius, config.exec);
  }

  Eigen::MatrixXd static_matrix;
  std::vector<std::vector<int>> static_ids;
  std::vector<std::uint8_t> static_degenerate;
  if (want_static) {
    static_matrix = Eigen::MatrixXd::Zero(batch, dim);
    static_ids.resize(batch);
    static_degenerate.assign(batch, 0);
    const int index_count = shields.index ? shields.index->size() : 0;
    const double radius = config.spell.radius;
    const auto extra_rows = static_cast<int>(shields.extra_centers.rows());
    for_each_index(batch, config.exec, errors.wrap([&](int b) {
      const Eigen::VectorXd xhat = xhats.row(b).transpose();
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim);
      bool degenerate = false;
      auto& ids = static_ids[b];
      if (config.spell.soft) {
        // Soft weighting has unbounded support; shields beyond the numerical
        // cutoff contribute below double precision and are skipped.
        const double cutoff = radius + 12.0;
        if (shields.index) {
          auto found = shields.index->radius_search(xhat, cutoff, shields.n_probe);
          std::sort(found.hits.begin(), found.hits.end(),
                    [](const RadiusHit& a, const RadiusHit& c) { return a.id < c.id; });
          for (const auto& hit : found.hits) {
            const Eigen::VectorXd diff = xhat - shields.index->center(hit.id);
            acc += dps_weight(diff.squaredNorm(), radius, dim,
                              config.spell.soft_series_terms) *
                   diff;
            ids.push_back(hit.id);
          }
        }
        for (int s = 0; s < extra_rows; ++s) {
          const Eigen::VectorXd diff = xhat - shields.extra_centers.row(s).transpose();
          const double sq = diff.squaredNorm();
          if (sq >= cutoff * cutoff) continue;
          acc += dps_weight(sq, radius, dim, config.spell.soft_series_terms) * diff;
          ids.push_back(index_count + s);
        }
      } else {
        if (shields.index) {
          auto found = shields.index->radius_search(xhat, radius, shields.n_probe);
          // Accumulate in id order so the index path matches the exhaustive
          // path bit for bit whenever the hit sets agree.
          std::sort(found.hits.begin(), found.hits.end(),
                    [](const RadiusHit& a, const RadiusHit& c) { return a.id < c.id; });
          for (const auto& hit : found.hits) {
            const auto pd = repel_from(xhat, shields.index->center(hit.id), radius);
            acc += pd.delta;
            degenerate = degenerate || pd.degenerate;
            ids.push_back(hit.id);
          }
        }
        const double sq_radius = radius * radius;
        for (int s = 0; s < extra_rows; ++s) {
          const double sq =
              (xhat.transpose() - shields.extra_centers.row(s)).squaredNorm();
          if (sq >= sq_radius) continue;
          const auto pd = repel_from(xhat, shields.extra_centers.row(s).transpose(),
                                     radius);
          acc += pd.delta;
          degenerate = degenerate || pd.degenerate;
          ids.push_back(index_count + s);
        }
      }
      static_matrix.row(b) = acc.transpose();
      static_degenerate[b] = degenerate ? 1 : 0;
    }));
    errors.rethrow();
  }

  Eigen::MatrixXd pg_grads;
  const bool want_pg = config.pg_bandwidth > 0.0 && !final_step;
  if (want_pg) {
    pg_grads = particle_guidance(states, config.pg_bandwidth, config.exec);
  }

  const auto [alpha_c, sigma_c] = config.schedule.alpha_sigma_clamped(t);
  const double beta_t = config.schedule.beta(t);
  const double sqrt_beta_dt = std::sqrt(beta_t) * std::sqrt(dt);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(dim);

  for_each_index(batch, config.exec, errors.wrap([&](int b) {
    const Eigen::VectorXd x = states.row(b).transpose();
    const Eigen::VectorXd score = scores.row(b).transpose();

    int active = 0;
    bool degenerate = false;
    Eigen::VectorXd delta = zero;
    if (spell_on) {
      const Eigen::VectorXd st =
          want_static ? static_matrix.row(b).transpose() : zero;
      const Eigen::VectorXd bt =
          want_batch ? batch_deltas.deltas.row(b).transpose() : zero;
      delta = combine_deltas(st, bt, config.spell);
      if (want_static) {
        active += static_cast<int>(static_ids[b].size());
        degenerate = degenerate || static_degenerate[b] != 0;
      }
      if (want_batch) {
        active += batch_deltas.active_count[b];
        degenerate = degenerate || batch_deltas.degenerate[b] != 0;
      }
    }

    // Inactive rows take the uncorrected values untouched, so a run that
    // never repels is bitwise identical to one with repellency disabled.
    const bool inactive = active == 0;
    double delta_norm = 0.0;
    Eigen::VectorXd effective_score;
    Eigen::VectorXd corrected;
    if (inactive) {
      effective_score = score;
      corrected = xhats.row(b).transpose();
    } else {
      const Eigen::VectorXd score_delta = to_score_space(delta, config.schedule, t);
      delta_norm = score_delta.norm();
      if (config.spell.space == CorrectionSpace::kDenoised) {
        corrected = xhats.row(b).transpose() + delta;
        effective_score = (alpha_c * corrected - x) / (sigma_c * sigma_c);
      } else {
        effective_score = score + score_delta;
        corrected = (x + sigma_c * sigma_c * effective_score) / alpha_c;
      }
    }

    Eigen::VectorXd next;
    if (final_step) {
      next = corrected;
    } else {
      Eigen::VectorXd drift_score = effective_score;
      if (want_pg) drift_score += pg_grads.row(b).transpose();
      Eigen::VectorXd noise(dim);
      rng::gaussian_fill(config.seed, rng::Domain::kStepNoise,
                         config.trajectory_offset + static_cast<std::uint32_t>(b),
                         static_cast<std::uint32_t>(step_index), noise);
      next = x - dt * (-0.5 * beta_t * x - beta_t * drift_score) +
             sqrt_beta_dt * noise;
    }
    if (!next.allFinite())
      throw NumericError("sampler: non-finite state during reverse step");
    states.row(b) = next.transpose();

    if (trace != nullptr) {
      auto& rec =
          trace->records[static_cast<std::size_t>(step_index) * batch + b];
      rec.step = step_index;
      rec.t = t;
      rec.traj = config.trajectory_offset + b;
      rec.delta_norm = delta_norm;
      rec.score_norm = score.norm();
      rec.active_count = active;
      rec.degenerate = degenerate;
      if (want_static) rec.shield_ids = static_ids[b];
    }
  }));
  errors.rethrow();
}

RunResult generate(const GaussianMixture& mixture, const RunConfig& config,
                   const ShieldSources& shields) {
  config.validate(mixture);
  const int dim = mixture.dim();
  if (shields.index && shields.index->dim() != dim)
    throw ConfigError("sampler: shield index dimension mismatch");
  if (shields.extra_centers.rows() > 0 && shields.extra_centers.cols() != dim)
    throw ConfigError("sampler: extra shield dimension mismatch");
  if (shields.n_probe < 1) throw ConfigError("sampler: n_probe must be >= 1");

  Eigen::MatrixXd states(config.batch, dim);
  for_each_index(config.batch, config.exec, [&](int b) {
    Eigen::VectorXd init(dim);
    rng::gaussian_fill(config.seed, rng::Domain::kInitNoise,
                       config.trajectory_offset + static_cast<std::uint32_t>(b), 0,
                       init);
    states.row(b) = init.transpose();
  });

  TrajectoryTrace trace;
  trace.n_steps = config.grid.n_steps();
  trace.batch = config.batch;
  trace.store_xhat = config.record_trace && config.store_xhat;
  if (config.record_trace) {
    trace.records.resize(static_cast<std::size_t>(trace.n_steps) * config.batch);
    if (trace.store_xhat) trace.xhat_snapshots.resize(trace.n_steps);
  }
  for (int s = 0; s < config.grid.n_steps(); ++s) {
    backward_step(states, mixture, config, shields, s,
                  config.record_trace ? &trace : nullptr);
  }

  RunResult result;
  result.samples = std::move(states);
  result.trace = std::move(trace);
  result.min_shield_distance = std::numeric_limits<double>::infinity();

  const Eigen::MatrixXd all = shields.all_centers(dim);
  if (all.rows() > 0) {
    const double margin = config.spell.radius - 1e-9;
    std::vector<int> row_violations(config.batch, 0);
    std::vector<double> row_min(config.batch,
                                std::numeric_limits<double>::infinity());
    for_each_index(config.batch, config.exec, [&](int b) {
      for (int s = 0; s < all.rows(); ++s) {
        const double dist = (result.samples.row(b) - all.row(s)).norm();
        row_min[b] = std::min(row_min[b], dist);
        if (dist < margin) ++row_violations[b];
      }
    });
    for (int b = 0; b < config.batch; ++b) {
      result.violation_count += row_violations[b];
      result.min_shield_distance = std::min(result.min_shield_distance, row_min[b]);
    }
  }
  return result;
}

}  // namespace spell
