#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "spell/kernels.hpp"

namespace spell {

struct RadiusHit {
  int id;
  double distance;
};

struct RadiusQueryResult {
  std::vector<RadiusHit> hits;  // ascending by (distance, id)
  int probed_cells = 0;
  bool exhaustive = false;  // every cell was scanned
};

// Exact scan over the full center set; the reference the index is tested
// against. A hit is a center strictly within `radius` of the query, matching
// the support of the repellency term.
RadiusQueryResult brute_force_search(const Eigen::MatrixXd& centers,
                                     const Eigen::VectorXd& query, double radius);

// Inverted-file flat index: a k-means coarse quantizer partitions the centers
// into cells and a radius query scans only the n_probe cells whose centroids
// are nearest. The approximation is one-sided: reported hits are always true
// hits, and probing every cell recovers the exact result.
class IvfIndex {
 public:
  static int default_cell_count(int n);  // ceil(sqrt(n))

  static IvfIndex build(const Eigen::MatrixXd& centers, int n_cells,
                        std::uint64_t seed, Exec exec = Exec::kParallel);

  RadiusQueryResult radius_search(const Eigen::VectorXd& query, double radius,
                                  int n_probe) const;

  int size() const { return static_cast<int>(centers_.rows()); }
  int dim() const { return dim_; }
  int n_cells() const { return static_cast<int>(centroids_.rows()); }
  std::uint64_t seed() const { return seed_; }
  const Eigen::MatrixXd& centers() const { return centers_; }
  const Eigen::MatrixXd& centroids() const { return centroids_; }
  const std::vector<std::vector<int>>& cells() const { return cells_; }
  Eigen::VectorXd center(int id) const;

  void save(const std::string& path) const;
  static IvfIndex load(const std::string& path);

 private:
  int dim_ = 0;
  std::uint64_t seed_ = 0;
  Eigen::MatrixXd centers_;    // by id
  Eigen::MatrixXd centroids_;  // one per cell
  std::vector<std::vector<int>> cells_;
};

}  // namespace spell
