#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <boost/math/special_functions/bessel.hpp>
#include <cmath>
#include <string>

#include "spell/dps.hpp"
#include "spell/errors.hpp"
#include "spell/guidance.hpp"

using namespace spell;

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Independent density-quadrature oracle: integrates the noncentral
// chi-square pdf (Bessel form) with composite Simpson. Valid for dof >= 2.
double noncentral_cdf_quadrature(double nc, int dof, double x) {
  if (nc == 0.0) return boost::math::gamma_p(0.5 * dof, 0.5 * x);
  const auto pdf = [&](double u) {
    if (u <= 0.0) return dof == 2 ? 0.5 * std::exp(-0.5 * nc) : 0.0;
    const double order = 0.5 * dof - 1.0;
    return 0.5 * std::exp(-0.5 * (u + nc)) * std::pow(u / nc, 0.5 * order) *
           boost::math::cyl_bessel_i(order, std::sqrt(nc * u));
  };
  const int intervals = 20000;
  const double h = x / intervals;
  double acc = pdf(0.0) + pdf(x);
  for (int i = 1; i < intervals; ++i) acc += pdf(i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

}  // namespace

TEST_CASE("central chi square closed forms") {
  for (double x : {0.1, 0.5, 1.0, 2.5, 7.0}) {
    CHECK(chi2_cdf(2, x) == doctest::Approx(1.0 - std::exp(-0.5 * x)).epsilon(1e-12));
    CHECK(chi2_cdf(1, x) ==
          doctest::Approx(std::erf(std::sqrt(0.5 * x))).epsilon(1e-12));
  }
  CHECK(chi2_cdf(4, 0.0) == 0.0);
  CHECK(chi2_cdf(4, -1.0) == 0.0);
  CHECK_THROWS_AS((void)chi2_cdf(0, 1.0), NumericError);
}

TEST_CASE("noncentral cdf reduces to central at zero noncentrality") {
  for (int dof : {1, 2, 5, 10}) {
    for (double x : {0.2, 1.0, 3.0, 9.0}) {
      CHECK(noncentral_chi2_cdf(0.0, dof, x) ==
            doctest::Approx(chi2_cdf(dof, x)).epsilon(1e-12));
    }
  }
  CHECK(noncentral_chi2_cdf(0.0, 2, 1.0) ==
        doctest::Approx(1.0 - std::exp(-0.5)).epsilon(1e-12));
}

TEST_CASE("noncentral cdf matches the one dimensional closed form") {
  for (double nc : {0.25, 1.0, 4.0, 9.0}) {
    const double mu = std::sqrt(nc);
    for (double x : {0.1, 0.5, 1.0, 2.0, 6.0}) {
      const double oracle =
          normal_cdf(std::sqrt(x) - mu) - normal_cdf(-std::sqrt(x) - mu);
      CHECK(noncentral_chi2_cdf(nc, 1, x) == doctest::Approx(oracle).epsilon(1e-10));
    }
  }
}

TEST_CASE("noncentral cdf matches density quadrature") {
  for (int dof : {2, 5, 10}) {
    for (double nc : {0.5, 2.0, 8.0}) {
      for (double x : {0.5, 2.0, 6.0, 12.0}) {
        const double oracle = noncentral_cdf_quadrature(nc, dof, x);
        CHECK(noncentral_chi2_cdf(nc, dof, x) == doctest::Approx(oracle).epsilon(1e-7));
      }
    }
  }
}

TEST_CASE("noncentral cdf is monotone and bounded") {
  double previous = 0.0;
  for (int i = 1; i <= 40; ++i) {
    const double value = noncentral_chi2_cdf(3.0, 4, 0.5 * i);
    CHECK(value >= previous);
    CHECK(value <= 1.0);
    previous = value;
  }
  CHECK(noncentral_chi2_cdf(3.0, 4, 0.0) == 0.0);
}

TEST_CASE("soft weight matches a finite difference of the mass") {
  // w = -2 dF/d(nc) / (1 - F), differentiated numerically as the oracle.
  for (int dim : {1, 2, 5, 10}) {
    for (double nc : {0.5, 1.0, 4.0, 16.0}) {
      for (double radius : {0.5, 1.0, 2.0}) {
        const double x = radius * radius;
        const double h = 1e-6 * std::max(1.0, nc);
        const double f_hi = noncentral_chi2_cdf(nc + h, dim, x);
        const double f_lo = noncentral_chi2_cdf(nc - h, dim, x);
        const double f_at = noncentral_chi2_cdf(nc, dim, x);
        const double oracle = -2.0 * (f_hi - f_lo) / (2.0 * h) / (1.0 - f_at);
        const double weight = dps_weight(nc, radius, dim);
        CHECK(weight > 0.0);
        CHECK(weight == doctest::Approx(oracle).epsilon(1e-4));
      }
    }
  }
}

TEST_CASE("soft weight decays but never reaches zero") {
  const double radius = 1.0;
  const double far = (10.0 * radius) * (10.0 * radius);
  const double weight = dps_weight(far, radius, 2);
  CHECK(weight > 0.0);
  CHECK(weight * std::sqrt(far) < 1e-8);  // full correction magnitude at distance 10r
}

TEST_CASE("soft weight error paths") {
  CHECK_THROWS_AS((void)dps_weight(1.0, 0.0, 2), NumericError);
  CHECK_THROWS_AS((void)dps_weight(-1.0, 1.0, 2), NumericError);
  CHECK_THROWS_AS((void)dps_weight(1.0, 1.0, 0), NumericError);
  // All predictive mass inside the shield.
  CHECK_THROWS_AS((void)dps_weight(0.0, 1000.0, 2), NumericError);
  // Truncation too tight for a wide Poisson spread.
  try {
    (void)dps_weight(200.0, 1.0, 2, 5);
    FAIL("expected a convergence error");
  } catch (const NumericError& error) {
    CHECK(std::string(error.what()).find("tail bound") != std::string::npos);
  }
}

TEST_CASE("soft correction geometry") {
  ShieldSet shields = ShieldSet::empty(2, 0.8);
  SUBCASE("no shields, no correction") {
    CHECK(dps_correction(Eigen::Vector2d(0.3, 0.4), shields).norm() == 0.0);
  }

  shields.append(Eigen::Vector2d(1.0, 0.0));
  SUBCASE("at the center the direction vanishes") {
    CHECK(dps_correction(Eigen::Vector2d(1.0, 0.0), shields).norm() == 0.0);
  }
  SUBCASE("points away from the shield") {
    const Eigen::Vector2d xhat(1.4, 0.3);
    const Eigen::VectorXd correction = dps_correction(xhat, shields);
    CHECK(correction.dot(xhat - Eigen::Vector2d(1.0, 0.0)) > 0.0);
  }
  SUBCASE("far shields are skipped entirely") {
    const Eigen::Vector2d near_cutoff(1.0 + 0.8 + 11.0, 0.0);
    CHECK(dps_correction(near_cutoff, shields).norm() > 0.0);
    const Eigen::Vector2d past_cutoff(1.0 + 0.8 + 12.5, 0.0);
    CHECK(dps_correction(past_cutoff, shields).norm() == 0.0);
  }
  SUBCASE("contributions add over shields") {
    shields.append(Eigen::Vector2d(-1.0, 0.0));
    const Eigen::VectorXd at_origin = dps_correction(Eigen::Vector2d(0.0, 0.0), shields);
    CHECK(at_origin.norm() < 1e-15);  // symmetric pair cancels
  }
}
