#pragma once

#include <Eigen/Core>
#include <optional>

#include "spell/kernels.hpp"

namespace spell {

struct MetricsReport {
  double vendi = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double density = 0.0;
  double coverage = 0.0;
  double frechet_raw = 0.0;
  int k_neighbors = 0;
};

// Effective diversity: exp of the von Neumann entropy of the normalized
// kernel Gram matrix. n identical points score 1; n mutually orthogonal
// directions score n. Cosine similarity by default, RBF when a bandwidth is
// given (which also handles points at the origin).
double vendi_score(const Eigen::MatrixXd& points,
                   std::optional<double> rbf_bandwidth = std::nullopt,
                   Exec exec = Exec::kParallel);

struct KnnMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double density = 0.0;
  double coverage = 0.0;
};

// Manifold estimates via k-th nearest neighbor balls:
//   precision  fraction of generated points inside some reference ball
//   recall     fraction of reference points inside some generated ball
//   density    mean number of covering reference balls per generated point,
//              normalized by k
//   coverage   fraction of reference points with a generated point inside
//              their own ball
// Ball membership is inclusive of the boundary. Requires k < both set sizes.
KnnMetrics knn_metrics(const Eigen::MatrixXd& generated,
                       const Eigen::MatrixXd& reference, int k,
                       Exec exec = Exec::kParallel);

// Squared mean gap plus covariance misalignment,
//   |mu_g - mu_r|^2 + tr(C_g + C_r - 2 (C_g C_r)^{1/2}),
// with unbiased sample covariances. Reported raw (no rescaling).
double gaussian_frechet(const Eigen::MatrixXd& generated,
                        const Eigen::MatrixXd& reference);

MetricsReport compute_metrics(const Eigen::MatrixXd& generated,
                              const Eigen::MatrixXd& reference, int k_neighbors = 3,
                              std::optional<double> vendi_bandwidth = std::nullopt,
                              Exec exec = Exec::kParallel);

}  // namespace spell
