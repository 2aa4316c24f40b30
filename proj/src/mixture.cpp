#include "spell/mixture.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

#include "spell/errors.hpp"

namespace spell {
namespace {

constexpr double kLog2Pi = 1.8378770664093453;

struct MarginalComponent {
  double log_weight;
  Eigen::VectorXd mean;
  Eigen::LLT<Eigen::MatrixXd> llt;
};

std::vector<MarginalComponent> factor_marginal(
    const std::vector<MixtureComponent>& components, double alpha, double sigma,
    std::optional<int> label) {
  std::vector<MarginalComponent> out;
  double total = 0.0;
  for (const auto& c : components) {
    if (label && c.label != label) continue;
    total += c.weight;
  }
  if (total <= 0.0) throw ConfigError("mixture: no component carries the requested label");
  const int dim = static_cast<int>(components.front().mean.size());
  const Eigen::MatrixXd noise = sigma * sigma * Eigen::MatrixXd::Identity(dim, dim);
  for (const auto& c : components) {
    if (label && c.label != label) continue;
    MarginalComponent m;
    m.log_weight = std::log(c.weight / total);
    m.mean = alpha * c.mean;
    m.llt.compute(alpha * alpha * c.cov + noise);
    if (m.llt.info() != Eigen::Success)
      throw NumericError("mixture: marginal covariance is not positive definite");
    out.push_back(std::move(m));
  }
  return out;
}

double log_det_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

}  // namespace

GaussianMixture::GaussianMixture(std::vector<MixtureComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw ConfigError("mixture: needs at least one component");
  dim_ = static_cast<int>(components_.front().mean.size());
  if (dim_ < 1) throw ConfigError("mixture: dimension must be >= 1");
  double total = 0.0;
  for (auto& c : components_) {
    if (!(c.weight > 0.0)) throw ConfigError("mixture: weights must be positive");
    total += c.weight;
    if (c.mean.size() != dim_) throw ConfigError("mixture: inconsistent dimensions");
    if (c.cov.rows() != dim_ || c.cov.cols() != dim_)
      throw ConfigError("mixture: covariance shape mismatch");
    const double asym = (c.cov - c.cov.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-9) throw ConfigError("mixture: covariance must be symmetric");
    c.cov = (0.5 * (c.cov + c.cov.transpose())).eval();
    if (Eigen::LLT<Eigen::MatrixXd>(c.cov).info() != Eigen::Success)
      throw ConfigError("mixture: covariance must be positive definite");
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw ConfigError("mixture: weights must sum to 1");
}

std::vector<int> GaussianMixture::labels() const {
  std::set<int> seen;
  for (const auto& c : components_) {
    if (c.label) seen.insert(*c.label);
  }
  return {seen.begin(), seen.end()};
}

GaussianMixture GaussianMixture::conditional(int label) const {
  std::vector<MixtureComponent> picked;
  double total = 0.0;
  for (const auto& c : components_) {
    if (c.label == label) {
      picked.push_back(c);
      total += c.weight;
    }
  }
  if (picked.empty()) throw ConfigError("mixture: no component carries the requested label");
  for (auto& c : picked) c.weight /= total;
  return GaussianMixture(std::move(picked));
}

GaussianMixture GaussianMixture::marginal_at(const NoiseSchedule& schedule,
                                             double t) const {
  const auto [alpha, sigma] = schedule.alpha_sigma(t);
  std::vector<MixtureComponent> comps = components_;
  const Eigen::MatrixXd noise =
      sigma * sigma * Eigen::MatrixXd::Identity(dim_, dim_);
  for (auto& c : comps) {
    c.mean = (alpha * c.mean).eval();
    c.cov = (alpha * alpha * c.cov + noise).eval();
  }
  return GaussianMixture(std::move(comps));
}

ScoreEvaluation GaussianMixture::score(const NoiseSchedule& schedule, double t,
                                       const Eigen::VectorXd& x,
                                       std::optional<int> label) const {
  if (x.size() != dim_) throw NumericError("score: point dimension mismatch");
  if (!x.allFinite()) throw NumericError("score: non-finite input point");
  const auto [alpha, sigma] = schedule.alpha_sigma(t);
  const auto marginal = factor_marginal(components_, alpha, sigma, label);

  const auto n = static_cast<int>(marginal.size());
  std::vector<double> log_terms(n);
  std::vector<Eigen::VectorXd> pulls(n);
  double max_log = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < n; ++k) {
    const Eigen::VectorXd diff = x - marginal[k].mean;
    const Eigen::VectorXd solved = marginal[k].llt.solve(diff);
    const double quad = diff.dot(solved);
    log_terms[k] = marginal[k].log_weight -
                   0.5 * (dim_ * kLog2Pi + log_det_from_llt(marginal[k].llt) + quad);
    pulls[k] = -solved;
    max_log = std::max(max_log, log_terms[k]);
  }

  double denom = 0.0;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(dim_);
  for (int k = 0; k < n; ++k) {
    const double w = std::exp(log_terms[k] - max_log);
    denom += w;
    grad += w * pulls[k];
  }

  ScoreEvaluation eval;
  eval.score = grad / denom;
  eval.log_density = max_log + std::log(denom);
  eval.denoised = (x + sigma * sigma * eval.score) / alpha;
  return eval;
}

ScoreEvaluation GaussianMixture::cfg_score(const NoiseSchedule& schedule, double t,
                                           const Eigen::VectorXd& x, int label,
                                           double gamma) const {
  if (!(gamma >= 1.0)) throw ConfigError("cfg: gamma must be >= 1");
  if (gamma == 1.0) return score(schedule, t, x, label);
  const ScoreEvaluation cond = score(schedule, t, x, label);
  const ScoreEvaluation uncond = score(schedule, t, x);
  const auto [alpha, sigma] = schedule.alpha_sigma(t);

  ScoreEvaluation eval;
  eval.score = gamma * cond.score - (gamma - 1.0) * uncond.score;
  eval.log_density = gamma * cond.log_density - (gamma - 1.0) * uncond.log_density;
  eval.denoised = (x + sigma * sigma * eval.score) / alpha;
  return eval;
}

Eigen::MatrixXd GaussianMixture::sample(rng::Sequence& stream, int count,
                                        std::optional<int> label) const {
  std::vector<const MixtureComponent*> picked;
  double total = 0.0;
  for (const auto& c : components_) {
    if (label && c.label != label) continue;
    picked.push_back(&c);
    total += c.weight;
  }
  if (picked.empty()) throw ConfigError("mixture: no component carries the requested label");

  std::vector<Eigen::MatrixXd> chol;
  chol.reserve(picked.size());
  for (const auto* c : picked) {
    chol.push_back(Eigen::LLT<Eigen::MatrixXd>(c->cov).matrixL());
  }

  Eigen::MatrixXd out(count, dim_);
  for (int i = 0; i < count; ++i) {
    const double u = stream.uniform() * total;
    std::size_t k = 0;
    double acc = 0.0;
    for (; k + 1 < picked.size(); ++k) {
      acc += picked[k]->weight;
      if (u < acc) break;
    }
    out.row(i) =
        (picked[k]->mean + chol[k] * stream.normal_vector(dim_)).transpose();
  }
  return out;
}

}  // namespace spell
