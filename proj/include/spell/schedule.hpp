#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

namespace spell {

// Variance-preserving forward noising process
//   dx = -beta(t)/2 x dt + sqrt(beta(t)) dw,  t in [0, 1]
// with a linear noise rate beta(t). alpha_t and sigma_t are the closed-form
// signal and noise levels of the induced marginal x_t | x_0.
struct NoiseSchedule {
  double beta_min = 0.1;
  double beta_max = 20.0;
  // Floor applied by the clamped accessor; keeps sigma away from zero where it
  // appears in denominators. Never applied to the exact accessor.
  double t_min = 1e-3;

  void validate() const;

  double beta(double t) const { return beta_min + t * (beta_max - beta_min); }
  double log_alpha(double t) const {
    return -0.5 * t * (beta_min + 0.5 * t * (beta_max - beta_min));
  }

  // (alpha_t, sigma_t) with alpha_t^2 + sigma_t^2 = 1. Exact at the endpoints:
  // alpha_0 = 1, sigma_0 = 0. Throws NumericError outside [0, 1].
  std::pair<double, double> alpha_sigma(double t) const;

  // Same pair evaluated at max(t, t_min).
  std::pair<double, double> alpha_sigma_clamped(double t) const;

  // Drift and diffusion of the forward process at (t, x).
  std::pair<Eigen::VectorXd, double> drift_diffusion(double t,
                                                     const Eigen::VectorXd& x) const;
};

// Descending sampling grid 1 = t_0 > t_1 > ... > t_n = 0.
struct TimeGrid {
  std::vector<double> times;

  static TimeGrid uniform(int n_steps);
  int n_steps() const { return static_cast<int>(times.size()) - 1; }
};

}  // namespace spell
