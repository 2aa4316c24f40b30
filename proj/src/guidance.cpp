#include "spell/guidance.hpp"

#include <cmath>

#include "spell/errors.hpp"

namespace spell {

ShieldSet ShieldSet::empty(int dim, double radius) {
  ShieldSet set;
  set.centers.resize(0, dim);
  set.radius = radius;
  return set;
}

void ShieldSet::append(const Eigen::VectorXd& center) {
  if (centers.cols() != center.size())
    throw NumericError("shield set: center dimension mismatch");
  centers.conservativeResize(centers.rows() + 1, Eigen::NoChange);
  centers.row(centers.rows() - 1) = center.transpose();
}

void ShieldSet::append_rows(const Eigen::MatrixXd& rows) {
  if (rows.rows() == 0) return;
  if (centers.cols() != rows.cols())
    throw NumericError("shield set: center dimension mismatch");
  const auto old = centers.rows();
  centers.conservativeResize(old + rows.rows(), Eigen::NoChange);
  centers.bottomRows(rows.rows()) = rows;
}

void SpellConfig::validate() const {
  if (!(radius >= 0.0)) throw ConfigError("spell: radius must be >= 0");
  if (!(overcompensation > 0.0))
    throw ConfigError("spell: overcompensation must be positive");
  if (soft_series_terms < 1)
    throw ConfigError("spell: soft_series_terms must be >= 1");
}

Eigen::VectorXd degenerate_direction(int dim) {
  Eigen::VectorXd dir = Eigen::VectorXd::Zero(dim);
  dir[0] = 1.0;
  return dir;
}

PointDelta repel_from(const Eigen::VectorXd& xhat, const Eigen::VectorXd& center,
                      double radius, double direction_sign) {
  PointDelta out;
  const Eigen::VectorXd diff = xhat - center;
  const double dist = diff.norm();
  if (dist == 0.0) {
    out.delta = (direction_sign * radius) * degenerate_direction(xhat.size());
    out.degenerate = true;
    return out;
  }
  if (dist >= radius) {
    out.delta = Eigen::VectorXd::Zero(xhat.size());
    return out;
  }
  out.delta = (radius / dist - 1.0) * diff;
  return out;
}

StaticDeltas static_deltas(const Eigen::MatrixXd& xhats, const ShieldSet& shields,
                           Exec exec) {
  const auto n = static_cast<int>(xhats.rows());
  const auto k = shields.size();
  StaticDeltas out;
  out.deltas = Eigen::MatrixXd::Zero(n, xhats.cols());
  out.active.resize(n);
  out.degenerate.assign(n, 0);
  if (k == 0 || shields.radius <= 0.0) return out;
  const double sq_radius = shields.radius * shields.radius;
  for_each_index(n, exec, [&](int i) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(xhats.cols());
    for (int s = 0; s < k; ++s) {
      const double sq = (xhats.row(i) - shields.centers.row(s)).squaredNorm();
      if (sq >= sq_radius) continue;
      const auto pd = repel_from(xhats.row(i).transpose(),
                                 shields.centers.row(s).transpose(), shields.radius);
      acc += pd.delta;
      out.active[i].push_back(s);
      if (pd.degenerate) out.degenerate[i] = 1;
    }
    out.deltas.row(i) = acc.transpose();
  });
  return out;
}

BatchDeltas intra_batch_deltas(const Eigen::MatrixXd& xhats, double radius,
                               Exec exec) {
  const auto n = static_cast<int>(xhats.rows());
  BatchDeltas out;
  out.deltas = Eigen::MatrixXd::Zero(n, xhats.cols());
  out.active_count.assign(n, 0);
  out.degenerate.assign(n, 0);
  if (radius <= 0.0 || n < 2) return out;
  const double sq_radius = radius * radius;
  for_each_index(n, exec, [&](int i) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(xhats.cols());
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double sq = (xhats.row(i) - xhats.row(j)).squaredNorm();
      if (sq >= sq_radius) continue;
      const auto pd = repel_from(xhats.row(i).transpose(), xhats.row(j).transpose(),
                                 radius, i < j ? 1.0 : -1.0);
      acc += pd.delta;
      ++out.active_count[i];
      if (pd.degenerate) out.degenerate[i] = 1;
    }
    out.deltas.row(i) = acc.transpose();
  });
  return out;
}

Eigen::VectorXd combine_deltas(const Eigen::VectorXd& static_delta,
                               const Eigen::VectorXd& batch_delta,
                               const SpellConfig& config) {
  switch (config.mode) {
    case RepelMode::kStatic:
      return config.overcompensation * static_delta;
    case RepelMode::kIntraBatch:
      return config.overcompensation * batch_delta;
    case RepelMode::kMixed:
      return config.overcompensation * (static_delta + batch_delta);
  }
  throw NumericError("combine_deltas: unknown mode");
}

Eigen::VectorXd to_score_space(const Eigen::VectorXd& delta,
                               const NoiseSchedule& schedule, double t) {
  const auto [alpha, sigma] = schedule.alpha_sigma_clamped(t);
  return (alpha / (sigma * sigma)) * delta;
}

Eigen::MatrixXd particle_guidance(const Eigen::MatrixXd& states, double bandwidth,
                                  Exec exec) {
  if (!(bandwidth > 0.0))
    throw NumericError("particle_guidance: bandwidth must be positive");
  const auto n = static_cast<int>(states.rows());
  const double inv_sq = 1.0 / (bandwidth * bandwidth);
  Eigen::MatrixXd grads = Eigen::MatrixXd::Zero(n, states.cols());
  for_each_index(n, exec, [&](int i) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(states.cols());
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const Eigen::VectorXd diff = states.row(i) - states.row(j);
      acc += std::exp(-0.5 * diff.squaredNorm() * inv_sq) * diff;
    }
    grads.row(i) = (2.0 * inv_sq) * acc.transpose();
  });
  return grads;
}

}  // namespace spell
