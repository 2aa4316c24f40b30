#include "spell/dps.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <sstream>

#include "spell/errors.hpp"
#include "spell/guidance.hpp"

namespace spell {
namespace {

constexpr double kTailTol = 1e-10;

struct SeriesResult {
  double cdf;            // sum_j c_j F_{dof+2j}(x)
  double weighted_terms; // sum_j c_j T_j, where T_j = F_{dof+2j} - F_{dof+2j+2}
};

// Single pass over the Poisson series. The central CDFs are chained through
// the exact recurrence P(a+1, z) = P(a, z) - z^a e^{-z} / Gamma(a+1), so only
// one incomplete-gamma evaluation is needed.
SeriesResult noncentral_series(double noncentrality, int dof, double x,
                               int max_terms) {
  if (!(noncentrality >= 0.0))
    throw NumericError("noncentral series: noncentrality must be >= 0");
  if (dof < 1) throw NumericError("noncentral series: dof must be >= 1");
  if (!(x >= 0.0)) throw NumericError("noncentral series: x must be >= 0");
  if (max_terms < 1) throw NumericError("noncentral series: max_terms must be >= 1");
  if (x == 0.0) return {0.0, 0.0};

  const double z = 0.5 * x;
  const double half_nc = 0.5 * noncentrality;
  double poisson = std::exp(-half_nc);
  if (poisson == 0.0)
    throw NumericError("noncentral series: Poisson weights underflow");
  double cdf_term = boost::math::gamma_p(0.5 * dof, z);
  double step = std::exp(0.5 * dof * std::log(z) - z - std::lgamma(0.5 * dof + 1.0));

  double cdf = 0.0;
  double weighted = 0.0;
  double cumulative = 0.0;
  for (int j = 0; j < max_terms; ++j) {
    cdf += poisson * cdf_term;
    weighted += poisson * step;
    cumulative += poisson;
    if (1.0 - cumulative < kTailTol) return {cdf, weighted};
    cdf_term -= step;
    if (cdf_term < 0.0) cdf_term = 0.0;
    step *= z / (0.5 * dof + j + 1.0);
    poisson *= half_nc / (j + 1.0);
  }
  std::ostringstream msg;
  msg << "noncentral series: not converged after " << max_terms
      << " terms, tail bound " << (1.0 - cumulative);
  throw NumericError(msg.str());
}

}  // namespace

double chi2_cdf(int dof, double x) {
  if (dof < 1) throw NumericError("chi2_cdf: dof must be >= 1");
  if (x <= 0.0) return 0.0;
  return boost::math::gamma_p(0.5 * dof, 0.5 * x);
}

double noncentral_chi2_cdf(double noncentrality, int dof, double x,
                           int max_terms) {
  return noncentral_series(noncentrality, dof, x, max_terms).cdf;
}

double dps_weight(double noncentrality, double radius, int dim, int max_terms) {
  if (!(radius > 0.0)) throw NumericError("dps_weight: radius must be positive");
  const auto series =
      noncentral_series(noncentrality, dim, radius * radius, max_terms);
  const double outside = 1.0 - series.cdf;
  if (!(outside > 0.0))
    throw NumericError("dps_weight: shield captures all predictive mass");
  // dF/d(nc) = -weighted_terms / 2, and w = 2 / (F - 1) * dF/d(nc).
  return series.weighted_terms / outside;
}

Eigen::VectorXd dps_correction(const Eigen::VectorXd& xhat,
                               const ShieldSet& shields, int max_terms) {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(xhat.size());
  if (shields.size() == 0 || shields.radius <= 0.0) return acc;
  const double cutoff = shields.radius + 12.0;
  for (int s = 0; s < shields.size(); ++s) {
    const Eigen::VectorXd diff = xhat - shields.centers.row(s).transpose();
    const double sq = diff.squaredNorm();
    if (sq > cutoff * cutoff) continue;
    acc += dps_weight(sq, shields.radius, static_cast<int>(xhat.size()),
                      max_terms) *
           diff;
  }
  return acc;
}

}  // namespace spell
