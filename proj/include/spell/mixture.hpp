#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "spell/rng.hpp"
#include "spell/schedule.hpp"

namespace spell {

struct NoiseSchedule;

struct MixtureComponent {
  double weight = 0.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::optional<int> label;
};

// Score, denoised prediction, and log density of the same field at one point.
struct ScoreEvaluation {
  Eigen::VectorXd score;
  Eigen::VectorXd denoised;
  double log_density = 0.0;
};

// Gaussian mixture data distribution with analytically tractable diffused
// marginals: under the variance-preserving process each component
// N(mu, Sigma) becomes N(alpha_t mu, alpha_t^2 Sigma + sigma_t^2 I), so the
// score of the noised density is exact at every t.
class GaussianMixture {
 public:
  explicit GaussianMixture(std::vector<MixtureComponent> components);

  int dim() const { return dim_; }
  const std::vector<MixtureComponent>& components() const { return components_; }
  std::vector<int> labels() const;

  // Sub-mixture of the components carrying `label`, weights renormalized.
  GaussianMixture conditional(int label) const;

  // The distribution of x_t under the schedule, as a mixture again.
  GaussianMixture marginal_at(const NoiseSchedule& schedule, double t) const;

  // Score of the noised marginal at (t, x), restricted to `label` when given.
  // The denoised field is the posterior mean E[x_0 | x_t = x].
  ScoreEvaluation score(const NoiseSchedule& schedule, double t,
                        const Eigen::VectorXd& x,
                        std::optional<int> label = std::nullopt) const;

  // Classifier-free-guided field: gamma * conditional - (gamma - 1) *
  // unconditional, combined at the score level; the denoised output is the
  // Tweedie image of the combined score. gamma = 1 reduces to score(label).
  ScoreEvaluation cfg_score(const NoiseSchedule& schedule, double t,
                            const Eigen::VectorXd& x, int label,
                            double gamma) const;

  // Exact draws from the mixture (or from conditional(label)).
  Eigen::MatrixXd sample(rng::Sequence& stream, int count,
                         std::optional<int> label = std::nullopt) const;

 private:
  std::vector<MixtureComponent> components_;
  int dim_ = 0;
};

}  // namespace spell
