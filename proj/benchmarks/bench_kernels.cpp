// Serial-vs-parallel comparison of the distance kernels. Arg pair: problem
// size, then 0 for the serial reference or 1 for the OpenMP path.

#include <benchmark/benchmark.h>

#include <Eigen/Core>
#include <cstdint>

#include "spell/guidance.hpp"
#include "spell/kernels.hpp"
#include "spell/rng.hpp"

namespace {

Eigen::MatrixXd random_points(int n, int dim, std::uint64_t seed) {
  spell::rng::Sequence stream(seed, spell::rng::Domain::kReference);
  Eigen::MatrixXd points(n, dim);
  for (int i = 0; i < n; ++i) {
    points.row(i) = stream.normal_vector(dim).transpose();
  }
  return points;
}

spell::Exec exec_of(const benchmark::State& state) {
  return state.range(1) == 0 ? spell::Exec::kSerial : spell::Exec::kParallel;
}

void size_by_exec(benchmark::internal::Benchmark* bench) {
  for (const int n : {256, 1024, 4096}) {
    bench->Args({n, 0});
    bench->Args({n, 1});
  }
}

}  // namespace

static void BM_KnnRadii(benchmark::State& state) {
  const Eigen::MatrixXd points =
      random_points(static_cast<int>(state.range(0)), 8, 11);
  for (auto _ : state) {
    benchmark::DoNotOptimize(spell::knn_radii(points, 5, exec_of(state)));
  }
}
BENCHMARK(BM_KnnRadii)->Apply(size_by_exec);

static void BM_CountsInRefBalls(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Eigen::MatrixXd points = random_points(n, 8, 12);
  const Eigen::MatrixXd refs = random_points(n, 8, 13);
  const Eigen::VectorXd radii = spell::knn_radii(refs, 5, spell::Exec::kSerial);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        spell::counts_in_ref_balls(points, refs, radii, exec_of(state)));
  }
}
BENCHMARK(BM_CountsInRefBalls)->Apply(size_by_exec);

static void BM_GramCosine(benchmark::State& state) {
  const Eigen::MatrixXd points =
      random_points(static_cast<int>(state.range(0)), 8, 14);
  for (auto _ : state) {
    benchmark::DoNotOptimize(spell::gram_cosine(points, exec_of(state)));
  }
}
BENCHMARK(BM_GramCosine)->Apply(size_by_exec);

static void BM_KmeansAssign(benchmark::State& state) {
  const Eigen::MatrixXd points =
      random_points(static_cast<int>(state.range(0)), 8, 15);
  const Eigen::MatrixXd centroids = random_points(64, 8, 16);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        spell::kmeans_assign(points, centroids, exec_of(state)));
  }
}
BENCHMARK(BM_KmeansAssign)->Apply(size_by_exec);

static void BM_IntraBatchDeltas(benchmark::State& state) {
  const Eigen::MatrixXd xhats =
      random_points(static_cast<int>(state.range(0)), 8, 17);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        spell::intra_batch_deltas(xhats, 0.8, exec_of(state)));
  }
}
BENCHMARK(BM_IntraBatchDeltas)->Apply(size_by_exec);

static void BM_ParticleGuidance(benchmark::State& state) {
  const Eigen::MatrixXd states =
      random_points(static_cast<int>(state.range(0)), 8, 18);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        spell::particle_guidance(states, 1.5, exec_of(state)));
  }
}
BENCHMARK(BM_ParticleGuidance)->Apply(size_by_exec);

BENCHMARK_MAIN();
