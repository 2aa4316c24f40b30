#include "spell/metrics.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "spell/errors.hpp"

namespace spell {
namespace {

// Eigenvalues below -1e-8 mean the input was not a covariance product;
// roundoff-scale negatives are clipped to zero.
Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success)
    throw NumericError("metrics: eigendecomposition failed");
  Eigen::VectorXd vals = solver.eigenvalues();
  for (int i = 0; i < vals.size(); ++i) {
    if (vals[i] < -1e-8)
      throw NumericError("metrics: matrix square root of an indefinite matrix");
    vals[i] = std::sqrt(std::max(vals[i], 0.0));
  }
  return solver.eigenvectors() * vals.asDiagonal() *
         solver.eigenvectors().transpose();
}

// Unbiased sample covariance, ridge-regularized when near-singular.
Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& points) {
  const auto n = static_cast<double>(points.rows());
  const Eigen::RowVectorXd mean = points.colwise().mean();
  const Eigen::MatrixXd centered = points.rowwise() - mean;
  Eigen::MatrixXd cov = centered.transpose() * centered / (n - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() == Eigen::Success &&
      solver.eigenvalues().minCoeff() < 1e-10) {
    cov += 1e-10 * Eigen::MatrixXd::Identity(cov.rows(), cov.cols());
  }
  return cov;
}

}  // namespace

double vendi_score(const Eigen::MatrixXd& points,
                   std::optional<double> rbf_bandwidth, Exec exec) {
  const auto n = static_cast<int>(points.rows());
  if (n < 1) throw NumericError("vendi: empty point set");
  const Eigen::MatrixXd gram = rbf_bandwidth
                                   ? gram_rbf(points, *rbf_bandwidth, exec)
                                   : gram_cosine(points, exec);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram / n);
  if (solver.info() != Eigen::Success)
    throw NumericError("vendi: eigendecomposition failed");
  double entropy = 0.0;
  for (int i = 0; i < n; ++i) {
    const double lambda = solver.eigenvalues()[i];
    if (lambda > 1e-12) entropy -= lambda * std::log(lambda);
  }
  return std::exp(entropy);
}

KnnMetrics knn_metrics(const Eigen::MatrixXd& generated,
                       const Eigen::MatrixXd& reference, int k, Exec exec) {
  const auto n_gen = static_cast<int>(generated.rows());
  const auto n_ref = static_cast<int>(reference.rows());
  if (generated.cols() != reference.cols())
    throw NumericError("knn metrics: dimension mismatch");
  if (k < 1 || k >= n_gen || k >= n_ref)
    throw NumericError("knn metrics: k must satisfy 1 <= k < both set sizes");

  const Eigen::VectorXd ref_radii = knn_radii(reference, k, exec);
  const Eigen::VectorXd gen_radii = knn_radii(generated, k, exec);

  const Eigen::VectorXi gen_in_ref = counts_in_ref_balls(generated, reference,
                                                         ref_radii, exec);
  const Eigen::VectorXi ref_in_gen = counts_in_ref_balls(reference, generated,
                                                         gen_radii, exec);
  const Eigen::VectorXi covered = counts_in_own_ball(reference, ref_radii,
                                                     generated, exec);

  KnnMetrics out;
  out.precision = static_cast<double>((gen_in_ref.array() > 0).count()) / n_gen;
  out.recall = static_cast<double>((ref_in_gen.array() > 0).count()) / n_ref;
  out.density = gen_in_ref.cast<double>().sum() / (static_cast<double>(k) * n_gen);
  out.coverage = static_cast<double>((covered.array() > 0).count()) / n_ref;
  return out;
}

double gaussian_frechet(const Eigen::MatrixXd& generated,
                        const Eigen::MatrixXd& reference) {
  if (generated.cols() != reference.cols())
    throw NumericError("frechet: dimension mismatch");
  if (generated.rows() <= generated.cols() || reference.rows() <= reference.cols())
    throw NumericError("frechet: needs more points than dimensions per set");

  const Eigen::VectorXd mean_gap = (generated.colwise().mean() -
                                    reference.colwise().mean())
                                       .transpose();
  const Eigen::MatrixXd cov_gen = sample_covariance(generated);
  const Eigen::MatrixXd cov_ref = sample_covariance(reference);

  const Eigen::MatrixXd root = symmetric_sqrt(cov_gen);
  // tr((C_g C_r)^{1/2}) through the similar symmetric product.
  const Eigen::MatrixXd inner = root * cov_ref * root;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      0.5 * (inner + inner.transpose()));
  if (solver.info() != Eigen::Success)
    throw NumericError("frechet: eigendecomposition failed");
  double trace_root = 0.0;
  for (int i = 0; i < solver.eigenvalues().size(); ++i) {
    trace_root += std::sqrt(std::max(solver.eigenvalues()[i], 0.0));
  }
  return mean_gap.squaredNorm() + cov_gen.trace() + cov_ref.trace() -
         2.0 * trace_root;
}

MetricsReport compute_metrics(const Eigen::MatrixXd& generated,
                              const Eigen::MatrixXd& reference, int k_neighbors,
                              std::optional<double> vendi_bandwidth, Exec exec) {
  MetricsReport report;
  report.k_neighbors = k_neighbors;
  report.vendi = vendi_score(generated, vendi_bandwidth, exec);
  const KnnMetrics knn = knn_metrics(generated, reference, k_neighbors, exec);
  report.precision = knn.precision;
  report.recall = knn.recall;
  report.density = knn.density;
  report.coverage = knn.coverage;
  report.frechet_raw = gaussian_frechet(generated, reference);
  return report;
}

}  // namespace spell
