#pragma once

#include <Eigen/Core>
#include <vector>

namespace spell {

// Execution policy for the data-parallel kernels. Both paths compute over
// independent output slots with serial inner reductions, so results are
// bitwise identical; the serial path is the reference the tests compare
// against and the benchmark baseline.
enum class Exec { kSerial, kParallel };

template <typename F>
void for_each_index(int n, [[maybe_unused]] Exec exec, F&& body) {
#ifdef _OPENMP
  if (exec == Exec::kParallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
#endif
  for (int i = 0; i < n; ++i) body(i);
}

// Distance to the k-th nearest other row, per row. Self is excluded by index,
// so duplicate rows count as neighbors at distance zero. Requires 1 <= k < n.
Eigen::VectorXd knn_radii(const Eigen::MatrixXd& points, int k, Exec exec);

// Per point: number of reference balls B(ref_j, ref_radii_j) containing it.
Eigen::VectorXi counts_in_ref_balls(const Eigen::MatrixXd& points,
                                    const Eigen::MatrixXd& refs,
                                    const Eigen::VectorXd& ref_radii, Exec exec);

// Per center: number of points inside its own ball B(center_i, radii_i).
Eigen::VectorXi counts_in_own_ball(const Eigen::MatrixXd& centers,
                                   const Eigen::VectorXd& radii,
                                   const Eigen::MatrixXd& points, Exec exec);

// Cosine-similarity Gram matrix. Rows must be nonzero.
Eigen::MatrixXd gram_cosine(const Eigen::MatrixXd& points, Exec exec);

// RBF Gram matrix exp(-|x - y|^2 / (2 h^2)).
Eigen::MatrixXd gram_rbf(const Eigen::MatrixXd& points, double bandwidth,
                         Exec exec);

// Nearest-centroid assignment; distance ties go to the lowest centroid index.
std::vector<int> kmeans_assign(const Eigen::MatrixXd& points,
                               const Eigen::MatrixXd& centroids, Exec exec);

}  // namespace spell
