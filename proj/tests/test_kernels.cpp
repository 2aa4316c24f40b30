#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "spell/errors.hpp"
#include "spell/kernels.hpp"
#include "spell/rng.hpp"

using namespace spell;

namespace {

Eigen::MatrixXd random_points(int n, int dim, std::uint64_t seed) {
  rng::Sequence seq(seed, rng::Domain::kReference);
  Eigen::MatrixXd points(n, dim);
  for (int i = 0; i < n; ++i) points.row(i) = seq.normal_vector(dim).transpose();
  return points;
}

// Quadratic-scan oracle: sort all distances to other rows, take the k-th.
Eigen::VectorXd knn_radii_oracle(const Eigen::MatrixXd& points, int k) {
  const int n = static_cast<int>(points.rows());
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) {
    std::vector<double> dists;
    dists.reserve(n - 1);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      dists.push_back((points.row(i) - points.row(j)).norm());
    }
    std::sort(dists.begin(), dists.end());
    out[i] = dists[k - 1];
  }
  return out;
}

}  // namespace

TEST_CASE("knn radii against a sort oracle") {
  const Eigen::MatrixXd points = random_points(60, 3, 101);
  for (int k : {1, 2, 5, 59}) {
    const Eigen::VectorXd radii = knn_radii(points, k, Exec::kSerial);
    const Eigen::VectorXd oracle = knn_radii_oracle(points, k);
    for (int i = 0; i < points.rows(); ++i)
      CHECK(radii[i] == doctest::Approx(oracle[i]).epsilon(1e-12));
  }
}

TEST_CASE("knn radii excludes self and counts duplicates") {
  Eigen::MatrixXd points(3, 2);
  points << 0.0, 0.0, 0.0, 0.0, 3.0, 4.0;
  const Eigen::VectorXd r1 = knn_radii(points, 1, Exec::kSerial);
  CHECK(r1[0] == 0.0);  // duplicate neighbor, not self
  CHECK(r1[1] == 0.0);
  CHECK(r1[2] == 5.0);
  const Eigen::VectorXd r2 = knn_radii(points, 2, Exec::kSerial);
  CHECK(r2[0] == 5.0);
  CHECK(r2[1] == 5.0);
  CHECK(r2[2] == 5.0);
}

TEST_CASE("knn radii bounds") {
  const Eigen::MatrixXd points = random_points(5, 2, 7);
  CHECK_THROWS_AS((void)knn_radii(points, 0, Exec::kSerial), NumericError);
  CHECK_THROWS_AS((void)knn_radii(points, 5, Exec::kSerial), NumericError);
  CHECK_NOTHROW((void)knn_radii(points, 4, Exec::kSerial));
}

TEST_CASE("ball membership counts against a double loop") {
  const Eigen::MatrixXd points = random_points(40, 2, 11);
  const Eigen::MatrixXd refs = random_points(30, 2, 12);
  Eigen::VectorXd radii(30);
  rng::Sequence seq(13, rng::Domain::kReference);
  for (int i = 0; i < 30; ++i) radii[i] = 0.5 + seq.uniform();

  const Eigen::VectorXi in_refs = counts_in_ref_balls(points, refs, radii, Exec::kSerial);
  for (int i = 0; i < points.rows(); ++i) {
    int expected = 0;
    for (int j = 0; j < refs.rows(); ++j)
      if ((points.row(i) - refs.row(j)).norm() <= radii[j]) ++expected;
    CHECK(in_refs[i] == expected);
  }

  const Eigen::VectorXi own = counts_in_own_ball(refs, radii, points, Exec::kSerial);
  for (int j = 0; j < refs.rows(); ++j) {
    int expected = 0;
    for (int i = 0; i < points.rows(); ++i)
      if ((points.row(i) - refs.row(j)).norm() <= radii[j]) ++expected;
    CHECK(own[j] == expected);
  }
}

TEST_CASE("ball membership includes the boundary") {
  Eigen::MatrixXd points(1, 2);
  points << 3.0, 0.0;
  Eigen::MatrixXd refs(1, 2);
  refs << 0.0, 0.0;
  Eigen::VectorXd radii(1);
  radii << 3.0;
  CHECK(counts_in_ref_balls(points, refs, radii, Exec::kSerial)[0] == 1);
  CHECK(counts_in_own_ball(refs, radii, points, Exec::kSerial)[0] == 1);
  radii << 3.0 - 1e-12;
  CHECK(counts_in_ref_balls(points, refs, radii, Exec::kSerial)[0] == 0);
}

TEST_CASE("cosine gram matrix") {
  Eigen::MatrixXd points(3, 2);
  points << 1.0, 0.0, 0.0, 2.0, -3.0, 0.0;
  const Eigen::MatrixXd gram = gram_cosine(points, Exec::kSerial);
  CHECK(gram(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(gram(1, 1) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(gram(2, 2) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(gram(0, 1) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(gram(0, 2) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(gram(1, 2) == doctest::Approx(gram(2, 1)).epsilon(1e-14));

  Eigen::MatrixXd with_zero(2, 2);
  with_zero << 1.0, 0.0, 0.0, 0.0;
  CHECK_THROWS_AS((void)gram_cosine(with_zero, Exec::kSerial), NumericError);
}

TEST_CASE("rbf gram matrix") {
  Eigen::MatrixXd points(2, 1);
  points << 0.0, 2.0;
  const Eigen::MatrixXd gram = gram_rbf(points, 2.0, Exec::kSerial);
  CHECK(gram(0, 0) == 1.0);
  CHECK(gram(0, 1) == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
  CHECK_THROWS_AS((void)gram_rbf(points, 0.0, Exec::kSerial), NumericError);
  CHECK_THROWS_AS((void)gram_rbf(points, -1.0, Exec::kSerial), NumericError);
}

TEST_CASE("nearest centroid assignment with tie break") {
  Eigen::MatrixXd centroids(3, 1);
  centroids << -1.0, 1.0, 5.0;
  Eigen::MatrixXd points(4, 1);
  points << -0.9, 0.0, 3.1, 5.0;
  const std::vector<int> assign = kmeans_assign(points, centroids, Exec::kSerial);
  CHECK(assign[0] == 0);
  CHECK(assign[1] == 0);  // tie between centroids 0 and 1 goes low
  CHECK(assign[2] == 2);
  CHECK(assign[3] == 2);
}

TEST_CASE("serial and parallel paths agree bitwise") {
  const Eigen::MatrixXd points = random_points(80, 4, 21);
  const Eigen::MatrixXd refs = random_points(50, 4, 22);
  Eigen::VectorXd radii(50);
  rng::Sequence seq(23, rng::Domain::kReference);
  for (int i = 0; i < 50; ++i) radii[i] = 0.5 + seq.uniform();
  Eigen::MatrixXd centroids = random_points(7, 4, 24);

  CHECK(knn_radii(points, 3, Exec::kSerial) == knn_radii(points, 3, Exec::kParallel));
  CHECK(counts_in_ref_balls(points, refs, radii, Exec::kSerial) ==
        counts_in_ref_balls(points, refs, radii, Exec::kParallel));
  CHECK(counts_in_own_ball(refs, radii, points, Exec::kSerial) ==
        counts_in_own_ball(refs, radii, points, Exec::kParallel));
  CHECK(gram_cosine(points, Exec::kSerial) == gram_cosine(points, Exec::kParallel));
  CHECK(gram_rbf(points, 1.3, Exec::kSerial) == gram_rbf(points, 1.3, Exec::kParallel));
  CHECK(kmeans_assign(points, centroids, Exec::kSerial) ==
        kmeans_assign(points, centroids, Exec::kParallel));
}
