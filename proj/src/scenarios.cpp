#include <cmath>
#include <numbers>
#include <unordered_map>
#include <vector>

#include "spell/errors.hpp"
#include "spell/harness.hpp"

namespace spell {
namespace {

MixtureComponent iso_component(double weight, double x, double y, double variance,
                               std::optional<int> label = std::nullopt) {
  MixtureComponent component;
  component.weight = weight;
  component.mean = Eigen::Vector2d(x, y);
  component.cov = variance * Eigen::Matrix2d::Identity();
  component.label = label;
  return component;
}

// Eight-mode ring with strongly uneven weights under a broad unlabeled
// background. High guidance toward label 0 sharpens the uneven weights
// (effective mass ~ w^gamma), so a plain batch concentrates on the three
// heavy modes and intra-batch repellency has visible work to do.
ExperimentConfig collapse_scenario() {
  ExperimentConfig config;
  config.seed = 11;
  config.batch = 32;
  config.label = 0;
  config.gamma = 4.0;
  config.dim = 2;

  const double ring_mass = 0.15;
  const double ring_radius = 3.0;
  const double ring_weights[8] = {0.30, 0.04, 0.04, 0.22, 0.04, 0.04, 0.28, 0.04};
  for (int k = 0; k < 8; ++k) {
    const double angle = k * std::numbers::pi / 4.0;
    config.components.push_back(iso_component(ring_mass * ring_weights[k],
                                              ring_radius * std::cos(angle),
                                              ring_radius * std::sin(angle), 0.09, 0));
  }
  config.components.push_back(iso_component(1.0 - ring_mass, 0.0, 0.0, 9.0));

  // Radius sized so a heavy mode's share of the batch can still relax to
  // pairwise separation inside its basin; much larger and the batch jams
  // against the score pull and repellency never finishes.
  config.spell.radius = 0.8;
  config.spell.overcompensation = 1.0;
  config.spell.mode = RepelMode::kIntraBatch;
  config.spell.space = CorrectionSpace::kDenoised;

  config.metrics.k_neighbors = 3;
  config.metrics.reference_samples = 1024;
  config.metrics.reference_seed = 77;
  return config;
}

// Four blobs with 10^4 protected points drawn from them and thinned to
// pairwise gaps above 2r, served through the coarse-quantized index. Sweeping
// n_probe trades missed shields against probe work; full probing is exact.
ExperimentConfig protection_scenario() {
  ExperimentConfig config;
  config.seed = 23;
  config.batch = 2000;
  config.dim = 2;
  for (int sx : {-1, 1}) {
    for (int sy : {-1, 1}) {
      config.components.push_back(iso_component(0.25, 2.0 * sx, 2.0 * sy, 0.64));
    }
  }

  config.spell.radius = 0.01;
  config.spell.overcompensation = 1.0;
  config.spell.mode = RepelMode::kStatic;
  config.spell.space = CorrectionSpace::kDenoised;

  const GaussianMixture mixture(config.components);
  rng::Sequence stream(config.seed, rng::Domain::kScenario);
  const auto centers =
      poisson_thin(stream, mixture, 10000, 2.0 * config.spell.radius, 2000000);
  config.shields.kind = ShieldSourceConfig::Kind::kInline;
  config.shields.inline_centers.reserve(static_cast<std::size_t>(centers.rows()));
  for (Eigen::Index i = 0; i < centers.rows(); ++i) {
    config.shields.inline_centers.push_back(centers.row(i).transpose());
  }
  config.shields.use_index = true;
  config.shields.n_cells = 100;
  config.shields.index_seed = 101;
  config.shields.n_probe = 2;

  config.metrics.reference_samples = 2000;
  config.metrics.reference_seed = 88;

  config.sweep.n_probe = {1, 2, 3, 5, 10, 100};
  return config;
}

// One trajectory at a time, each finished sample becoming a shield for the
// next batch, so a sequential session spreads instead of resampling the same
// basin. Accumulated shields sit closer than 2r to each other, so the summed
// correction carries no escape guarantee there; the violation counter reports
// the residual in-shield landings honestly.
ExperimentConfig iterative_scenario() {
  ExperimentConfig config;
  config.seed = 37;
  config.batch = 1;
  config.n_batches = 16;
  config.dim = 2;
  config.components.push_back(iso_component(0.5, -2.0, 0.0, 0.09));
  config.components.push_back(iso_component(0.5, 2.0, 0.0, 0.09));

  config.spell.radius = 0.45;
  config.spell.overcompensation = 1.0;
  config.spell.mode = RepelMode::kStatic;
  config.spell.space = CorrectionSpace::kDenoised;
  config.shields.accumulate = true;

  config.metrics.reference_samples = 512;
  config.metrics.reference_seed = 99;
  return config;
}

struct GridKey {
  long long x;
  long long y;
  bool operator==(const GridKey& other) const { return x == other.x && y == other.y; }
};

struct GridKeyHash {
  std::size_t operator()(const GridKey& key) const {
    return static_cast<std::size_t>(key.x * 73856093LL ^ key.y * 19349663LL);
  }
};

}  // namespace

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> kNames = {"collapse", "protection", "iterative"};
  return kNames;
}

ExperimentConfig make_scenario(const std::string& name) {
  if (name == "collapse") return collapse_scenario();
  if (name == "protection") return protection_scenario();
  if (name == "iterative") return iterative_scenario();
  throw ConfigError("unknown scenario '" + name + "' (collapse, protection, iterative)");
}

Eigen::MatrixXd poisson_thin(rng::Sequence& stream, const GaussianMixture& mixture, int count,
                             double min_gap, int max_draws) {
  if (count < 1) throw ConfigError("poisson_thin: count must be at least 1");
  if (!(min_gap > 0.0)) throw ConfigError("poisson_thin: min_gap must be positive");
  const int dim = mixture.dim();
  // Cell side = min_gap, so conflicts live in the 3x3 neighborhood. Hashing
  // is on the first two coordinates, which is exact for the 2-D scenarios and
  // a correct (just slower) prefilter above that.
  const double cell = min_gap;
  const double gap_sq = min_gap * min_gap;
  Eigen::MatrixXd accepted(count, dim);
  std::unordered_map<GridKey, std::vector<int>, GridKeyHash> grid;
  int n_accepted = 0;

  for (int draw = 0; draw < max_draws && n_accepted < count; ++draw) {
    const Eigen::MatrixXd candidate = mixture.sample(stream, 1);
    const auto point = candidate.row(0);
    const GridKey key{static_cast<long long>(std::floor(point[0] / cell)),
                      static_cast<long long>(std::floor(dim > 1 ? point[1] / cell : 0.0))};
    bool clear = true;
    for (long long dx = -1; dx <= 1 && clear; ++dx) {
      for (long long dy = -1; dy <= 1 && clear; ++dy) {
        const auto bucket = grid.find(GridKey{key.x + dx, key.y + dy});
        if (bucket == grid.end()) continue;
        for (int id : bucket->second) {
          if ((accepted.row(id) - point).squaredNorm() <= gap_sq) {
            clear = false;
            break;
          }
        }
      }
    }
    if (!clear) continue;
    accepted.row(n_accepted) = point;
    grid[key].push_back(n_accepted);
    ++n_accepted;
  }
  if (n_accepted < count) {
    throw NumericError("poisson_thin: only " + std::to_string(n_accepted) + " of " +
                       std::to_string(count) + " points fit with gap " +
                       std::to_string(min_gap));
  }
  return accepted;
}

}  // namespace spell
