#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "spell/kernels.hpp"
#include "spell/schedule.hpp"

namespace spell {

// A set of protected points sharing one repellency radius.
struct ShieldSet {
  Eigen::MatrixXd centers;  // one shield per row
  double radius = 0.0;

  static ShieldSet empty(int dim, double radius);
  int size() const { return static_cast<int>(centers.rows()); }
  int dim() const { return static_cast<int>(centers.cols()); }
  void append(const Eigen::VectorXd& center);
  void append_rows(const Eigen::MatrixXd& rows);
};

enum class RepelMode { kStatic, kIntraBatch, kMixed };
enum class CorrectionSpace { kDenoised, kScore };

struct SpellConfig {
  double radius = 0.0;            // 0 disables repellency entirely
  double overcompensation = 1.0;  // scales the combined correction
  RepelMode mode = RepelMode::kStatic;
  CorrectionSpace space = CorrectionSpace::kDenoised;
  bool soft = false;  // soft probability-mass weighting for static shields
  int soft_series_terms = 256;

  bool enabled() const { return radius > 0.0; }
  void validate() const;
};

// Direction assigned when a repelled point sits exactly on a shield center and
// the repulsion direction is undefined: the first coordinate axis.
Eigen::VectorXd degenerate_direction(int dim);

struct PointDelta {
  Eigen::VectorXd delta;
  bool degenerate = false;
};

// relu(radius / |xhat - center| - 1) * (xhat - center): pushes xhat onto the
// boundary of the ball around `center`, exactly zero outside it. A point
// exactly at the center is pushed a full radius along degenerate_direction
// (scaled by `direction_sign`) and flagged.
PointDelta repel_from(const Eigen::VectorXd& xhat, const Eigen::VectorXd& center,
                      double radius, double direction_sign = 1.0);

struct StaticDeltas {
  Eigen::MatrixXd deltas;                // one row per batch element
  std::vector<std::vector<int>> active;  // intervening shield ids, ascending
  std::vector<std::uint8_t> degenerate;
};

// Unscaled repellency against every shield in the set, per batch row.
StaticDeltas static_deltas(const Eigen::MatrixXd& xhats, const ShieldSet& shields,
                           Exec exec);

struct BatchDeltas {
  Eigen::MatrixXd deltas;
  std::vector<int> active_count;  // repelling peers per row
  std::vector<std::uint8_t> degenerate;
};

// Mutual repellency inside one batch of denoised predictions: each row is
// repelled from every other row closer than `radius`, never from itself.
// Coincident rows i < j repel along +/- degenerate_direction respectively.
BatchDeltas intra_batch_deltas(const Eigen::MatrixXd& xhats, double radius,
                               Exec exec);

// lambda-scaled combination of the two delta sources per the configured mode.
Eigen::VectorXd combine_deltas(const Eigen::VectorXd& static_delta,
                               const Eigen::VectorXd& batch_delta,
                               const SpellConfig& config);

// Maps a denoised-space correction onto the score: alpha_t / sigma_t^2 times
// the delta, with sigma taken from the clamped accessor.
Eigen::VectorXd to_score_space(const Eigen::VectorXd& delta,
                               const NoiseSchedule& schedule, double t);

// Kernel-based mutual repulsion baseline evaluated at the noisy states
// themselves: grad_i = (2 / h^2) sum_{j != i} exp(-|x_i - x_j|^2 / (2 h^2))
// (x_i - x_j). Dense in the batch regardless of separation.
Eigen::MatrixXd particle_guidance(const Eigen::MatrixXd& states, double bandwidth,
                                  Exec exec);

}  // namespace spell
