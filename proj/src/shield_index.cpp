#include "spell/shield_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "spell/errors.hpp"
#include "spell/rng.hpp"

namespace spell {
namespace {

constexpr double kCentroidShiftTol = 1e-6;
constexpr int kMaxLloydIterations = 100;

void sort_hits(std::vector<RadiusHit>& hits) {
  std::sort(hits.begin(), hits.end(), [](const RadiusHit& a, const RadiusHit& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.id < b.id;
  });
}

// k-means++ seeding: each next centroid is drawn with probability
// proportional to its squared distance from the chosen set.
Eigen::MatrixXd seed_centroids(const Eigen::MatrixXd& points, int n_cells,
                               rng::Sequence& stream) {
  const auto n = static_cast<int>(points.rows());
  Eigen::MatrixXd centroids(n_cells, points.cols());
  centroids.row(0) = points.row(stream.uniform_index(n));
  Eigen::VectorXd sq_dist(n);
  for (int i = 0; i < n; ++i) {
    sq_dist[i] = (points.row(i) - centroids.row(0)).squaredNorm();
  }
  for (int c = 1; c < n_cells; ++c) {
    const double total = sq_dist.sum();
    int pick;
    if (total > 0.0) {
      const double target = stream.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        acc += sq_dist[i];
        if (target < acc) {
          pick = i;
          break;
        }
      }
    } else {
      pick = stream.uniform_index(n);
    }
    centroids.row(c) = points.row(pick);
    for (int i = 0; i < n; ++i) {
      sq_dist[i] =
          std::min(sq_dist[i], (points.row(i) - centroids.row(c)).squaredNorm());
    }
  }
  return centroids;
}

void write_u64(std::ofstream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_doubles(std::ofstream& out, const double* data, std::size_t n) {
  out.write(reinterpret_cast<const char*>(data), n * sizeof(double));
}

std::uint64_t read_u64(std::ifstream& in, const char* what) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw IoError(std::string("index load: truncated ") + what);
  return v;
}

void read_doubles(std::ifstream& in, double* data, std::size_t n, const char* what) {
  in.read(reinterpret_cast<char*>(data), n * sizeof(double));
  if (!in) throw IoError(std::string("index load: truncated ") + what);
}

}  // namespace

RadiusQueryResult brute_force_search(const Eigen::MatrixXd& centers,
                                     const Eigen::VectorXd& query, double radius) {
  RadiusQueryResult result;
  result.exhaustive = true;
  const double sq_radius = radius * radius;
  for (int i = 0; i < centers.rows(); ++i) {
    const double sq = (centers.row(i).transpose() - query).squaredNorm();
    if (sq < sq_radius) result.hits.push_back({i, std::sqrt(sq)});
  }
  sort_hits(result.hits);
  return result;
}

int IvfIndex::default_cell_count(int n) {
  return static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
}

IvfIndex IvfIndex::build(const Eigen::MatrixXd& centers, int n_cells,
                         std::uint64_t seed, Exec exec) {
  const auto n = static_cast<int>(centers.rows());
  if (n < 1) throw ConfigError("index build: empty center set");
  if (n_cells < 1 || n_cells > n)
    throw ConfigError("index build: n_cells must lie in [1, count]");

  rng::Sequence stream(seed, rng::Domain::kKMeans);
  Eigen::MatrixXd centroids = seed_centroids(centers, n_cells, stream);

  std::vector<int> assignment;
  for (int iter = 0; iter < kMaxLloydIterations; ++iter) {
    assignment = kmeans_assign(centers, centroids, exec);
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(n_cells, centers.cols());
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(n_cells);
    for (int i = 0; i < n; ++i) {
      sums.row(assignment[i]) += centers.row(i);
      counts[assignment[i]] += 1;
    }
    double shift = 0.0;
    for (int c = 0; c < n_cells; ++c) {
      if (counts[c] == 0) continue;  // empty cell keeps its centroid
      const Eigen::RowVectorXd updated = sums.row(c) / counts[c];
      shift = std::max(shift, (updated - centroids.row(c)).norm());
      centroids.row(c) = updated;
    }
    if (shift < kCentroidShiftTol) break;
  }
  assignment = kmeans_assign(centers, centroids, exec);

  IvfIndex index;
  index.dim_ = static_cast<int>(centers.cols());
  index.seed_ = seed;
  index.centers_ = centers;
  index.centroids_ = std::move(centroids);
  index.cells_.assign(n_cells, {});
  for (int i = 0; i < n; ++i) index.cells_[assignment[i]].push_back(i);
  return index;
}

RadiusQueryResult IvfIndex::radius_search(const Eigen::VectorXd& query,
                                          double radius, int n_probe) const {
  if (query.size() != dim_) throw NumericError("radius_search: dimension mismatch");
  if (n_probe < 1) throw ConfigError("radius_search: n_probe must be >= 1");
  const int probes = std::min(n_probe, n_cells());

  std::vector<std::pair<double, int>> order(n_cells());
  for (int c = 0; c < n_cells(); ++c) {
    order[c] = {(centroids_.row(c).transpose() - query).squaredNorm(), c};
  }
  std::partial_sort(order.begin(), order.begin() + probes, order.end());

  RadiusQueryResult result;
  result.probed_cells = probes;
  result.exhaustive = probes == n_cells();
  const double sq_radius = radius * radius;
  for (int p = 0; p < probes; ++p) {
    for (const int id : cells_[order[p].second]) {
      const double sq = (centers_.row(id).transpose() - query).squaredNorm();
      if (sq < sq_radius) result.hits.push_back({id, std::sqrt(sq)});
    }
  }
  sort_hits(result.hits);
  return result;
}

Eigen::VectorXd IvfIndex::center(int id) const {
  if (id < 0 || id >= size()) throw NumericError("index: center id out of range");
  return centers_.row(id).transpose();
}

void IvfIndex::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("index save: cannot open " + path);
  write_u64(out, static_cast<std::uint64_t>(dim_));
  write_u64(out, static_cast<std::uint64_t>(size()));
  write_u64(out, static_cast<std::uint64_t>(n_cells()));
  write_u64(out, seed_);
  for (int c = 0; c < n_cells(); ++c) {
    const Eigen::RowVectorXd row = centroids_.row(c);
    write_doubles(out, row.data(), static_cast<std::size_t>(dim_));
  }
  for (const auto& cell : cells_) {
    write_u64(out, cell.size());
    for (const int id : cell) write_u64(out, static_cast<std::uint64_t>(id));
    for (const int id : cell) {
      const Eigen::RowVectorXd row = centers_.row(id);
      write_doubles(out, row.data(), static_cast<std::size_t>(dim_));
    }
  }
  if (!out) throw IoError("index save: write failed for " + path);
}

IvfIndex IvfIndex::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("index load: cannot open " + path);
  const auto dim = read_u64(in, "header");
  const auto count = read_u64(in, "header");
  const auto n_cells = read_u64(in, "header");
  const auto seed = read_u64(in, "header");
  if (dim < 1 || dim > 1'000'000) throw IoError("index load: implausible dimension");
  if (count < 1) throw IoError("index load: empty index");
  if (n_cells < 1 || n_cells > count)
    throw IoError("index load: cell count outside [1, count]");

  IvfIndex index;
  index.dim_ = static_cast<int>(dim);
  index.seed_ = seed;
  index.centroids_.resize(static_cast<int>(n_cells), index.dim_);
  for (std::uint64_t c = 0; c < n_cells; ++c) {
    Eigen::RowVectorXd row(index.dim_);
    read_doubles(in, row.data(), dim, "centroid block");
    index.centroids_.row(static_cast<int>(c)) = row;
  }
  index.centers_.resize(static_cast<int>(count), index.dim_);
  index.cells_.assign(static_cast<std::size_t>(n_cells), {});
  std::vector<bool> seen(static_cast<std::size_t>(count), false);
  for (std::uint64_t c = 0; c < n_cells; ++c) {
    const auto len = read_u64(in, "cell header");
    if (len > count) throw IoError("index load: cell larger than index");
    auto& cell = index.cells_[static_cast<std::size_t>(c)];
    cell.reserve(static_cast<std::size_t>(len));
    for (std::uint64_t i = 0; i < len; ++i) {
      const auto id = read_u64(in, "cell ids");
      if (id >= count) throw IoError("index load: shield id out of range");
      if (seen[static_cast<std::size_t>(id)])
        throw IoError("index load: duplicate shield id across cells");
      seen[static_cast<std::size_t>(id)] = true;
      cell.push_back(static_cast<int>(id));
    }
    for (const int id : cell) {
      Eigen::RowVectorXd row(index.dim_);
      read_doubles(in, row.data(), dim, "cell vectors");
      index.centers_.row(id) = row;
    }
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end())
    throw IoError("index load: cells do not cover every shield id");
  in.peek();
  if (!in.eof()) throw IoError("index load: trailing bytes after last cell");
  return index;
}

}  // namespace spell
