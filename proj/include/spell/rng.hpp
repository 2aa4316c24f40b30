#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>

namespace spell::rng {

// Philox4x32-10 counter-based generator. Every random number in the library
// is a pure function of (seed, domain, unit, step, block), which makes runs
// reproducible bit for bit regardless of batch size, thread count, or the
// order in which streams are consumed.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

// Stream namespaces. Each domain is owned by exactly one consumer so streams
// never collide:
//   kInitNoise / kStepNoise  bulk per-trajectory draws inside the sampler
//   kScenario / kReference   Sequence draws for scenario and reference data
//   kKMeans                  Sequence draws for index construction
//   kMonteCarlo              bulk draws for Monte Carlo estimators
enum class Domain : std::uint32_t {
  kInitNoise = 0,
  kStepNoise = 1,
  kScenario = 2,
  kReference = 3,
  kKMeans = 4,
  kMonteCarlo = 5,
};

// One uniform in (0, 1) built from 64 bits of a single Philox block.
double uniform01(std::uint64_t seed, Domain domain, std::uint32_t unit,
                 std::uint32_t step, std::uint32_t block);

// Fills `out` with independent standard normals via Box-Muller, two per
// Philox block. The stream is fully determined by (seed, domain, unit, step).
void gaussian_fill(std::uint64_t seed, Domain domain, std::uint32_t unit,
                   std::uint32_t step, Eigen::Ref<Eigen::VectorXd> out);

// Incrementing convenience stream for scenario construction and estimators,
// where per-draw addressing would be noise. Each draw consumes one block.
class Sequence {
 public:
  Sequence(std::uint64_t seed, Domain domain, std::uint32_t unit = 0)
      : seed_(seed), domain_(domain), unit_(unit) {}

  double uniform();                    // in (0, 1)
  double normal();                     // standard normal
  Eigen::VectorXd normal_vector(int dim);
  // Uniform integer in [0, n).
  int uniform_index(int n);

 private:
  std::uint64_t seed_;
  Domain domain_;
  std::uint32_t unit_;
  std::uint64_t counter_ = 0;
};

}  // namespace spell::rng
