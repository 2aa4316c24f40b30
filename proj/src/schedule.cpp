#include "spell/schedule.hpp"

#include <cmath>

#include "spell/errors.hpp"

namespace spell {

void NoiseSchedule::validate() const {
  if (!(beta_min > 0.0)) throw ConfigError("schedule: beta_min must be positive");
  if (!(beta_max >= beta_min))
    throw ConfigError("schedule: beta_max must be >= beta_min");
  if (!(t_min > 0.0 && t_min <= 1.0))
    throw ConfigError("schedule: t_min must lie in (0, 1]");
}

std::pair<double, double> NoiseSchedule::alpha_sigma(double t) const {
  if (!(t >= 0.0 && t <= 1.0))
    throw NumericError("schedule: time outside [0, 1]");
  const double la = log_alpha(t);
  const double alpha = std::exp(la);
  // 1 - alpha^2 via expm1 to avoid cancellation near t = 0.
  const double sigma = std::sqrt(-std::expm1(2.0 * la));
  return {alpha, sigma};
}

std::pair<double, double> NoiseSchedule::alpha_sigma_clamped(double t) const {
  return alpha_sigma(t < t_min ? t_min : t);
}

std::pair<Eigen::VectorXd, double> NoiseSchedule::drift_diffusion(
    double t, const Eigen::VectorXd& x) const {
  const double b = beta(t);
  return {-0.5 * b * x, std::sqrt(b)};
}

TimeGrid TimeGrid::uniform(int n_steps) {
  if (n_steps < 1) throw ConfigError("time grid: n_steps must be >= 1");
  TimeGrid grid;
  grid.times.resize(n_steps + 1);
  for (int i = 0; i <= n_steps; ++i) {
    grid.times[i] = static_cast<double>(n_steps - i) / n_steps;
  }
  return grid;
}

}  // namespace spell
