#pragma once

#include <Eigen/Core>

namespace spell {

struct ShieldSet;

// Regularized central chi-square CDF with `dof` degrees of freedom.
double chi2_cdf(int dof, double x);

// Noncentral chi-square CDF as the Poisson-weighted series of central CDFs
//   F(x) = sum_j c_j(nc) F_{dof + 2j}(x),  c_j = (nc/2)^j e^{-nc/2} / j!
// truncated once the remaining Poisson mass drops below 1e-10. Throws
// NumericError (reporting the achieved tail bound) if max_terms is hit first.
double noncentral_chi2_cdf(double noncentrality, int dof, double x,
                           int max_terms = 256);

// Soft repellency weight: with a unit-variance Gaussian predictive density
// centered at squared distance `noncentrality` from a shield, the probability
// mass inside the shield ball is F(radius^2) of the noncentral chi-square
// above, and the weight is
//   w = 2 / (F(radius^2) - 1) * dF/d(noncentrality) (radius^2),
// the score-function factor of that mass constraint. Always positive and
// decaying smoothly with distance, in contrast to the hard relu cutoff.
double dps_weight(double noncentrality, double radius, int dim,
                  int max_terms = 256);

// Sum over shields of dps_weight times the outward direction. Shields farther
// than radius + 12 standard normal deviations contribute below double
// precision and are skipped.
Eigen::VectorXd dps_correction(const Eigen::VectorXd& xhat,
                               const ShieldSet& shields, int max_terms = 256);

}  // namespace spell
