#include "spell/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "spell/errors.hpp"

namespace spell {

Eigen::VectorXd knn_radii(const Eigen::MatrixXd& points, int k, Exec exec) {
  const auto n = static_cast<int>(points.rows());
  if (k < 1 || k >= n)
    throw NumericError("knn_radii: k must satisfy 1 <= k < n");
  Eigen::VectorXd radii(n);
  for_each_index(n, exec, [&](int i) {
    std::vector<double> sq;
    sq.reserve(n - 1);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      sq.push_back((points.row(i) - points.row(j)).squaredNorm());
    }
    std::nth_element(sq.begin(), sq.begin() + (k - 1), sq.end());
    radii[i] = std::sqrt(sq[k - 1]);
  });
  return radii;
}

Eigen::VectorXi counts_in_ref_balls(const Eigen::MatrixXd& points,
                                    const Eigen::MatrixXd& refs,
                                    const Eigen::VectorXd& ref_radii, Exec exec) {
  if (refs.rows() != ref_radii.size())
    throw NumericError("counts_in_ref_balls: radii size mismatch");
  const auto n = static_cast<int>(points.rows());
  const auto m = static_cast<int>(refs.rows());
  Eigen::VectorXi counts(n);
  for_each_index(n, exec, [&](int i) {
    int c = 0;
    for (int j = 0; j < m; ++j) {
      const double sq = (points.row(i) - refs.row(j)).squaredNorm();
      if (sq <= ref_radii[j] * ref_radii[j]) ++c;
    }
    counts[i] = c;
  });
  return counts;
}

Eigen::VectorXi counts_in_own_ball(const Eigen::MatrixXd& centers,
                                   const Eigen::VectorXd& radii,
                                   const Eigen::MatrixXd& points, Exec exec) {
  if (centers.rows() != radii.size())
    throw NumericError("counts_in_own_ball: radii size mismatch");
  const auto n = static_cast<int>(centers.rows());
  const auto m = static_cast<int>(points.rows());
  Eigen::VectorXi counts(n);
  for_each_index(n, exec, [&](int i) {
    const double sq_radius = radii[i] * radii[i];
    int c = 0;
    for (int j = 0; j < m; ++j) {
      if ((centers.row(i) - points.row(j)).squaredNorm() <= sq_radius) ++c;
    }
    counts[i] = c;
  });
  return counts;
}

Eigen::MatrixXd gram_cosine(const Eigen::MatrixXd& points, Exec exec) {
  const auto n = static_cast<int>(points.rows());
  Eigen::VectorXd norms(n);
  for (int i = 0; i < n; ++i) {
    norms[i] = points.row(i).norm();
    if (norms[i] == 0.0)
      throw NumericError("gram_cosine: zero vector has no direction");
  }
  Eigen::MatrixXd gram(n, n);
  for_each_index(n, exec, [&](int i) {
    for (int j = 0; j < n; ++j) {
      gram(i, j) = points.row(i).dot(points.row(j)) / (norms[i] * norms[j]);
    }
  });
  return gram;
}

Eigen::MatrixXd gram_rbf(const Eigen::MatrixXd& points, double bandwidth,
                         Exec exec) {
  if (!(bandwidth > 0.0)) throw NumericError("gram_rbf: bandwidth must be positive");
  const auto n = static_cast<int>(points.rows());
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  Eigen::MatrixXd gram(n, n);
  for_each_index(n, exec, [&](int i) {
    for (int j = 0; j < n; ++j) {
      gram(i, j) = std::exp(-(points.row(i) - points.row(j)).squaredNorm() * inv);
    }
  });
  return gram;
}

std::vector<int> kmeans_assign(const Eigen::MatrixXd& points,
                               const Eigen::MatrixXd& centroids, Exec exec) {
  const auto n = static_cast<int>(points.rows());
  const auto k = static_cast<int>(centroids.rows());
  if (k < 1) throw NumericError("kmeans_assign: empty centroid set");
  std::vector<int> assign(n);
  for_each_index(n, exec, [&](int i) {
    int best = 0;
    double best_sq = (points.row(i) - centroids.row(0)).squaredNorm();
    for (int c = 1; c < k; ++c) {
      const double sq = (points.row(i) - centroids.row(c)).squaredNorm();
      if (sq < best_sq) {
        best_sq = sq;
        best = c;
      }
    }
    assign[i] = best;
  });
  return assign;
}

}  // namespace spell
