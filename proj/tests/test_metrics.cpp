#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "spell/errors.hpp"
#include "spell/metrics.hpp"
#include "spell/rng.hpp"

using namespace spell;

namespace {

Eigen::MatrixXd random_points(int n, int dim, std::uint64_t seed,
                              double shift = 0.0) {
  rng::Sequence seq(seed, rng::Domain::kReference);
  Eigen::MatrixXd points(n, dim);
  for (int i = 0; i < n; ++i) points.row(i) = seq.normal_vector(dim).transpose();
  points.array() += shift;
  return points;
}

// Direct quadratic-definition evaluation of all four neighbor metrics.
KnnMetrics knn_oracle(const Eigen::MatrixXd& gen, const Eigen::MatrixXd& ref,
                      int k) {
  const auto kth_radius = [&](const Eigen::MatrixXd& points, int i) {
    std::vector<double> dists;
    for (int j = 0; j < points.rows(); ++j) {
      if (j == i) continue;
      dists.push_back((points.row(i) - points.row(j)).norm());
    }
    std::sort(dists.begin(), dists.end());
    return dists[k - 1];
  };
  std::vector<double> ref_radii(ref.rows()), gen_radii(gen.rows());
  for (int j = 0; j < ref.rows(); ++j) ref_radii[j] = kth_radius(ref, j);
  for (int i = 0; i < gen.rows(); ++i) gen_radii[i] = kth_radius(gen, i);

  KnnMetrics out;
  double density_sum = 0.0;
  int precision_hits = 0;
  for (int i = 0; i < gen.rows(); ++i) {
    int covering = 0;
    for (int j = 0; j < ref.rows(); ++j)
      if ((gen.row(i) - ref.row(j)).norm() <= ref_radii[j]) ++covering;
    if (covering > 0) ++precision_hits;
    density_sum += covering;
  }
  int recall_hits = 0;
  int coverage_hits = 0;
  for (int j = 0; j < ref.rows(); ++j) {
    bool recalled = false;
    for (int i = 0; i < gen.rows(); ++i)
      if ((ref.row(j) - gen.row(i)).norm() <= gen_radii[i]) recalled = true;
    if (recalled) ++recall_hits;
    bool covered = false;
    for (int i = 0; i < gen.rows(); ++i)
      if ((gen.row(i) - ref.row(j)).norm() <= ref_radii[j]) covered = true;
    if (covered) ++coverage_hits;
  }
  out.precision = static_cast<double>(precision_hits) / gen.rows();
  out.recall = static_cast<double>(recall_hits) / ref.rows();
  out.density = density_sum / (static_cast<double>(k) * gen.rows());
  out.coverage = static_cast<double>(coverage_hits) / ref.rows();
  return out;
}

}  // namespace

TEST_CASE("diversity score closed forms") {
  SUBCASE("identical points score one") {
    Eigen::MatrixXd same(7, 3);
    for (int i = 0; i < 7; ++i) same.row(i) << 1.0, 2.0, -0.5;
    CHECK(vendi_score(same) == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("orthogonal directions count themselves") {
    Eigen::MatrixXd axes = Eigen::MatrixXd::Identity(4, 4);
    axes.row(2) *= 3.0;  // cosine ignores magnitude
    CHECK(vendi_score(axes) == doctest::Approx(4.0).epsilon(1e-9));
  }
  SUBCASE("two duplicated orthogonal directions count two") {
    Eigen::MatrixXd points(4, 2);
    points << 1.0, 0.0, 2.0, 0.0, 0.0, 1.0, 0.0, 5.0;
    CHECK(vendi_score(points) == doctest::Approx(2.0).epsilon(1e-9));
  }
  SUBCASE("an antipodal pair collapses to one direction") {
    Eigen::MatrixXd points(2, 2);
    points << 1.0, 0.0, -1.0, 0.0;
    CHECK(vendi_score(points) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("diversity score invariances") {
  const Eigen::MatrixXd points = random_points(12, 3, 301);
  const double base = vendi_score(points);
  CHECK(base > 1.0);
  CHECK(base < 12.0);

  SUBCASE("permutation") {
    Eigen::MatrixXd shuffled(12, 3);
    const int order[12] = {5, 2, 9, 0, 11, 7, 1, 10, 4, 8, 3, 6};
    for (int i = 0; i < 12; ++i) shuffled.row(i) = points.row(order[i]);
    CHECK(vendi_score(shuffled) == doctest::Approx(base).epsilon(1e-9));
  }
  SUBCASE("duplication") {
    Eigen::MatrixXd doubled(24, 3);
    doubled.topRows(12) = points;
    doubled.bottomRows(12) = points;
    CHECK(vendi_score(doubled) == doctest::Approx(base).epsilon(1e-9));
  }
  SUBCASE("positive per-point scaling") {
    Eigen::MatrixXd scaled = points;
    for (int i = 0; i < 12; ++i) scaled.row(i) *= 0.5 + 0.25 * i;
    CHECK(vendi_score(scaled) == doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("diversity score with an rbf kernel") {
  Eigen::MatrixXd points(2, 2);
  points << 0.0, 0.0, 100.0, 0.0;  // origin is fine under rbf
  CHECK(vendi_score(points, 0.5) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(vendi_score(points, 1e6) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK_THROWS_AS((void)vendi_score(points), NumericError);  // cosine needs nonzero rows
  CHECK_THROWS_AS((void)vendi_score(points, 0.0), NumericError);
  CHECK_THROWS_AS((void)vendi_score(Eigen::MatrixXd(0, 2)), NumericError);
}

TEST_CASE("neighbor metrics on coincident and disjoint sets") {
  const Eigen::MatrixXd points = random_points(20, 2, 311);
  SUBCASE("a set against itself") {
    const KnnMetrics self = knn_metrics(points, points, 3);
    CHECK(self.precision == 1.0);
    CHECK(self.recall == 1.0);
    CHECK(self.coverage == 1.0);
    CHECK(self.density >= 1.0 / 3.0);
  }
  SUBCASE("far-apart sets miss entirely") {
    const Eigen::MatrixXd far = random_points(20, 2, 312, 1000.0);
    const KnnMetrics none = knn_metrics(points, far, 3);
    CHECK(none.precision == 0.0);
    CHECK(none.recall == 0.0);
    CHECK(none.density == 0.0);
    CHECK(none.coverage == 0.0);
  }
  SUBCASE("rigid rotation changes nothing") {
    const double c = std::cos(0.5), s = std::sin(0.5);
    Eigen::Matrix2d rot;
    rot << c, -s, s, c;
    const Eigen::MatrixXd gen = random_points(25, 2, 313);
    const KnnMetrics plain = knn_metrics(gen, points, 3);
    const KnnMetrics turned = knn_metrics(gen * rot.transpose(), points * rot.transpose(), 3);
    CHECK(turned.precision == doctest::Approx(plain.precision).epsilon(1e-12));
    CHECK(turned.recall == doctest::Approx(plain.recall).epsilon(1e-12));
    CHECK(turned.density == doctest::Approx(plain.density).epsilon(1e-12));
    CHECK(turned.coverage == doctest::Approx(plain.coverage).epsilon(1e-12));
  }
}

TEST_CASE("neighbor metrics match the quadratic definition exactly") {
  rng::Sequence seq(321, rng::Domain::kReference);
  for (int instance = 0; instance < 50; ++instance) {
    const int n_gen = 10 + seq.uniform_index(50);
    const int n_ref = 10 + seq.uniform_index(50);
    const int dim = 1 + seq.uniform_index(4);
    const int k = 1 + seq.uniform_index(5);
    const Eigen::MatrixXd gen = random_points(n_gen, dim, 1000 + instance);
    const Eigen::MatrixXd ref =
        random_points(n_ref, dim, 2000 + instance, 0.5);
    const KnnMetrics fast = knn_metrics(gen, ref, k);
    const KnnMetrics slow = knn_oracle(gen, ref, k);
    CHECK(fast.precision == slow.precision);
    CHECK(fast.recall == slow.recall);
    CHECK(fast.density == slow.density);
    CHECK(fast.coverage == slow.coverage);
  }
}

TEST_CASE("neighbor metrics bounds") {
  const Eigen::MatrixXd gen = random_points(5, 2, 331);
  const Eigen::MatrixXd ref = random_points(8, 2, 332);
  CHECK_THROWS_AS((void)knn_metrics(gen, ref, 0), NumericError);
  CHECK_THROWS_AS((void)knn_metrics(gen, ref, 5), NumericError);
  CHECK_NOTHROW((void)knn_metrics(gen, ref, 4));
  CHECK_THROWS_AS((void)knn_metrics(gen, random_points(8, 3, 333), 2), NumericError);
}

TEST_CASE("frechet distance closed forms") {
  const Eigen::MatrixXd base = random_points(60, 3, 341);
  SUBCASE("identical sets sit at zero") {
    CHECK(gaussian_frechet(base, base) == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
  }
  SUBCASE("a pure mean shift contributes its squared norm") {
    const Eigen::Vector3d v(0.7, -1.2, 0.4);
    Eigen::MatrixXd moved = base;
    moved.rowwise() += v.transpose();
    CHECK(gaussian_frechet(base, moved) ==
          doctest::Approx(v.squaredNorm()).epsilon(1e-9));
  }
  SUBCASE("one dimension reduces to moments") {
    const Eigen::MatrixXd a = random_points(50, 1, 342);
    Eigen::MatrixXd b = 1.7 * random_points(45, 1, 343);
    b.array() += 0.3;
    const auto moments = [](const Eigen::MatrixXd& m) {
      const double mean = m.col(0).mean();
      const double var =
          (m.col(0).array() - mean).square().sum() / (m.rows() - 1.0);
      return std::make_pair(mean, std::sqrt(var));
    };
    const auto [mean_a, sd_a] = moments(a);
    const auto [mean_b, sd_b] = moments(b);
    const double oracle = (mean_a - mean_b) * (mean_a - mean_b) +
                          (sd_a - sd_b) * (sd_a - sd_b);
    CHECK(gaussian_frechet(a, b) == doctest::Approx(oracle).epsilon(1e-9));
  }
  SUBCASE("symmetry") {
    const Eigen::MatrixXd other = random_points(70, 3, 344, 0.8);
    CHECK(gaussian_frechet(base, other) ==
          doctest::Approx(gaussian_frechet(other, base)).epsilon(1e-9));
  }
  SUBCASE("degenerate shapes are rejected") {
    CHECK_THROWS_AS((void)gaussian_frechet(random_points(3, 5, 345), base),
                    NumericError);
    CHECK_THROWS_AS((void)gaussian_frechet(base, random_points(3, 3, 346)),
                    NumericError);
    CHECK_THROWS_AS((void)gaussian_frechet(base, random_points(60, 2, 347)),
                    NumericError);
  }
}

TEST_CASE("metric bundle matches the individual calls") {
  const Eigen::MatrixXd gen = random_points(40, 2, 351);
  const Eigen::MatrixXd ref = random_points(50, 2, 352, 0.2);
  const MetricsReport report = compute_metrics(gen, ref, 4);
  CHECK(report.k_neighbors == 4);
  CHECK(report.vendi == vendi_score(gen));
  const KnnMetrics knn = knn_metrics(gen, ref, 4);
  CHECK(report.precision == knn.precision);
  CHECK(report.recall == knn.recall);
  CHECK(report.density == knn.density);
  CHECK(report.coverage == knn.coverage);
  CHECK(report.frechet_raw == gaussian_frechet(gen, ref));
  const MetricsReport rbf = compute_metrics(gen, ref, 4, 0.9);
  CHECK(rbf.vendi == vendi_score(gen, 0.9));
}
