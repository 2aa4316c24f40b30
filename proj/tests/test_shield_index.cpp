#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "spell/errors.hpp"
#include "spell/rng.hpp"
#include "spell/shield_index.hpp"

using namespace spell;

namespace {

Eigen::MatrixXd random_centers(int n, int dim, std::uint64_t seed) {
  rng::Sequence seq(seed, rng::Domain::kReference);
  Eigen::MatrixXd centers(n, dim);
  for (int i = 0; i < n; ++i) centers.row(i) = (2.0 * seq.normal_vector(dim)).transpose();
  return centers;
}

bool same_hits(const std::vector<RadiusHit>& a, const std::vector<RadiusHit>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].id != b[i].id || a[i].distance != b[i].distance) return false;
  return true;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("brute force search semantics") {
  Eigen::MatrixXd centers(3, 2);
  centers << 0.0, 0.0, 1.0, 0.0, 0.0, 2.0;
  const Eigen::Vector2d query(0.1, 0.0);

  SUBCASE("strict inequality at the boundary") {
    const auto at_boundary = brute_force_search(centers, query, 0.9);
    REQUIRE(at_boundary.hits.size() == 1);  // center 1 is at exactly 0.9
    CHECK(at_boundary.hits[0].id == 0);
    const auto just_past = brute_force_search(centers, query, 0.9 + 1e-12);
    CHECK(just_past.hits.size() == 2);
  }
  SUBCASE("hits sorted by distance then id") {
    const auto wide = brute_force_search(centers, Eigen::Vector2d(0.5, 0.0), 10.0);
    REQUIRE(wide.hits.size() == 3);
    CHECK(wide.hits[0].distance <= wide.hits[1].distance);
    CHECK(wide.hits[1].distance <= wide.hits[2].distance);
    CHECK(wide.exhaustive);
  }
  SUBCASE("equal distances break ties by id") {
    const auto tied = brute_force_search(centers, Eigen::Vector2d(0.5, 0.0), 1.0);
    REQUIRE(tied.hits.size() == 2);
    CHECK(tied.hits[0].id == 0);
    CHECK(tied.hits[1].id == 1);
    CHECK(tied.hits[0].distance == tied.hits[1].distance);
  }
  SUBCASE("zero radius yields nothing") {
    CHECK(brute_force_search(centers, Eigen::Vector2d(0.0, 0.0), 0.0).hits.empty());
  }
}

TEST_CASE("default cell count is ceil sqrt n") {
  CHECK(IvfIndex::default_cell_count(1) == 1);
  CHECK(IvfIndex::default_cell_count(2) == 2);
  CHECK(IvfIndex::default_cell_count(100) == 10);
  CHECK(IvfIndex::default_cell_count(101) == 11);
  CHECK(IvfIndex::default_cell_count(1131 * 1131) == 1131);
}

TEST_CASE("index build edge cases") {
  SUBCASE("single center") {
    Eigen::MatrixXd one(1, 3);
    one << 1.0, 2.0, 3.0;
    const IvfIndex index = IvfIndex::build(one, 1, 5);
    CHECK(index.size() == 1);
    CHECK(index.n_cells() == 1);
    const auto result = index.radius_search(Eigen::Vector3d(1.0, 2.0, 3.1), 0.2, 1);
    REQUIRE(result.hits.size() == 1);
    CHECK(result.hits[0].id == 0);
    CHECK(result.exhaustive);
  }
  SUBCASE("identical centers survive clustering") {
    Eigen::MatrixXd dup(6, 2);
    for (int i = 0; i < 6; ++i) dup.row(i) << 1.0, -1.0;
    const IvfIndex index = IvfIndex::build(dup, 3, 5);
    const auto result = index.radius_search(Eigen::Vector2d(1.0, -1.0), 0.5,
                                            index.n_cells());
    CHECK(result.hits.size() == 6);
  }
  SUBCASE("cell count bounds") {
    const Eigen::MatrixXd centers = random_centers(10, 2, 3);
    CHECK_THROWS_AS((void)IvfIndex::build(centers, 0, 5), ConfigError);
    CHECK_THROWS_AS((void)IvfIndex::build(centers, 11, 5), ConfigError);
    CHECK_NOTHROW((void)IvfIndex::build(centers, 10, 5));
  }
  SUBCASE("empty center set is rejected") {
    Eigen::MatrixXd none(0, 2);
    CHECK_THROWS_AS((void)IvfIndex::build(none, 1, 5), ConfigError);
  }
}

TEST_CASE("partition covers every id exactly once") {
  const Eigen::MatrixXd centers = random_centers(500, 3, 17);
  const IvfIndex index = IvfIndex::build(centers, IvfIndex::default_cell_count(static_cast<int>(centers.rows())), 9);
  CHECK(index.n_cells() == IvfIndex::default_cell_count(500));
  std::vector<int> seen(500, 0);
  for (const auto& cell : index.cells())
    for (int id : cell) ++seen[id];
  CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
  for (int id : {0, 77, 499})
    CHECK(index.center(id) == centers.row(id).transpose());
  CHECK_THROWS_AS((void)index.center(500), NumericError);
}

TEST_CASE("probing is monotone and converges to brute force") {
  const int n = 3000;
  const Eigen::MatrixXd centers = random_centers(n, 2, 31);
  const IvfIndex index = IvfIndex::build(centers, IvfIndex::default_cell_count(static_cast<int>(centers.rows())), 9);
  rng::Sequence seq(32, rng::Domain::kReference);
  const double radius = 0.35;

  int proper_subset_cases = 0;
  for (int q = 0; q < 200; ++q) {
    const Eigen::VectorXd query = 2.0 * seq.normal_vector(2);
    std::vector<RadiusHit> previous;
    for (int n_probe : {1, 2, 4, 8, index.n_cells()}) {
      const auto result = index.radius_search(query, radius, n_probe);
      std::set<int> ids;
      for (const auto& hit : result.hits) ids.insert(hit.id);
      std::set<int> prev_ids;
      for (const auto& hit : previous) prev_ids.insert(hit.id);
      CHECK(std::includes(ids.begin(), ids.end(), prev_ids.begin(), prev_ids.end()));
      if (ids.size() > prev_ids.size() && !previous.empty()) ++proper_subset_cases;
      previous = result.hits;
    }
    const auto exact = brute_force_search(centers, query, radius);
    CHECK(same_hits(previous, exact.hits));

    const auto partial = index.radius_search(query, radius, 1);
    for (const auto& hit : partial.hits) {
      CHECK((centers.row(hit.id).transpose() - query).norm() ==
            doctest::Approx(hit.distance).epsilon(1e-12));
      CHECK(hit.distance < radius);
    }
  }
  CHECK(proper_subset_cases > 0);  // small probes genuinely miss hits here
}

TEST_CASE("probe count bookkeeping") {
  const Eigen::MatrixXd centers = random_centers(200, 2, 41);
  const IvfIndex index = IvfIndex::build(centers, 10, 9);
  const Eigen::Vector2d query(0.0, 0.0);
  const auto one = index.radius_search(query, 0.5, 1);
  CHECK(one.probed_cells == 1);
  CHECK_FALSE(one.exhaustive);
  const auto clamped = index.radius_search(query, 0.5, 99);
  CHECK(clamped.probed_cells == 10);
  CHECK(clamped.exhaustive);
  CHECK_THROWS_AS((void)index.radius_search(query, 0.5, 0), ConfigError);
  CHECK_THROWS_AS((void)index.radius_search(Eigen::Vector3d::Zero(), 0.5, 1),
                  NumericError);
}

TEST_CASE("builds are deterministic in the seed") {
  const Eigen::MatrixXd centers = random_centers(400, 2, 51);
  const IvfIndex a = IvfIndex::build(centers, IvfIndex::default_cell_count(static_cast<int>(centers.rows())), 9);
  const IvfIndex b = IvfIndex::build(centers, IvfIndex::default_cell_count(static_cast<int>(centers.rows())), 9);
  CHECK(a.centroids() == b.centroids());
  CHECK(a.cells() == b.cells());
  const IvfIndex c = IvfIndex::build(centers, IvfIndex::default_cell_count(static_cast<int>(centers.rows())), 10);
  CHECK(c.centroids() != a.centroids());
}

TEST_CASE("save and load round trip") {
  const Eigen::MatrixXd centers = random_centers(250, 3, 61);
  const IvfIndex index = IvfIndex::build(centers, IvfIndex::default_cell_count(static_cast<int>(centers.rows())), 9);
  const auto path = temp_file("spell_index_roundtrip.bin");
  index.save(path.string());
  const IvfIndex loaded = IvfIndex::load(path.string());
  CHECK(loaded.size() == index.size());
  CHECK(loaded.dim() == index.dim());
  CHECK(loaded.seed() == index.seed());
  CHECK(loaded.centers() == index.centers());
  CHECK(loaded.centroids() == index.centroids());
  CHECK(loaded.cells() == index.cells());

  rng::Sequence seq(62, rng::Domain::kReference);
  for (int q = 0; q < 20; ++q) {
    const Eigen::VectorXd query = 2.0 * seq.normal_vector(3);
    const auto a = index.radius_search(query, 0.8, 3);
    const auto b = loaded.radius_search(query, 0.8, 3);
    CHECK(same_hits(a.hits, b.hits));
  }
  std::filesystem::remove(path);
}

TEST_CASE("load rejects damaged files") {
  const Eigen::MatrixXd centers = random_centers(50, 2, 71);
  const IvfIndex index = IvfIndex::build(centers, 5, 9);
  const auto path = temp_file("spell_index_damage.bin");
  index.save(path.string());

  SUBCASE("missing file") {
    CHECK_THROWS_AS((void)IvfIndex::load("/nonexistent/index.bin"), IoError);
  }
  SUBCASE("truncation") {
    const auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size / 2);
    CHECK_THROWS_AS((void)IvfIndex::load(path.string()), IoError);
  }
  SUBCASE("corrupted header") {
    std::fstream file(path, std::ios::in | std::ios::out | std::ios::binary);
    file.seekp(0);
    file.put('X');
    file.close();
    CHECK_THROWS_AS((void)IvfIndex::load(path.string()), IoError);
  }
  std::filesystem::remove(path);
}
