#include "spell/rng.hpp"

#include <cmath>
#include <numbers>

#include "spell/errors.hpp"

namespace spell::rng {
namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline std::array<std::uint32_t, 4> philox_round(
    const std::array<std::uint32_t, 4>& c, const std::array<std::uint32_t, 2>& k) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * c[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * c[2];
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const auto lo0 = static_cast<std::uint32_t>(p0);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const auto lo1 = static_cast<std::uint32_t>(p1);
  return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

inline std::array<std::uint32_t, 4> block_at(std::uint64_t seed, Domain domain,
                                             std::uint32_t unit, std::uint32_t step,
                                             std::uint32_t block) {
  const std::array<std::uint32_t, 4> counter = {
      block, step, unit, static_cast<std::uint32_t>(domain)};
  const std::array<std::uint32_t, 2> key = {
      static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return philox4x32(counter, key);
}

// Maps 64 random bits to (0, 1); the 0.5 ulp offset keeps both endpoints out.
inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1p-53;
}

struct NormalPair {
  double z0;
  double z1;
};

inline NormalPair box_muller(const std::array<std::uint32_t, 4>& w) {
  const double u1 = to_unit(w[0], w[1]);
  const double u2 = to_unit(w[2], w[3]);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    counter = philox_round(counter, key);
  }
  return counter;
}

double uniform01(std::uint64_t seed, Domain domain, std::uint32_t unit,
                 std::uint32_t step, std::uint32_t block) {
  const auto w = block_at(seed, domain, unit, step, block);
  return to_unit(w[0], w[1]);
}

void gaussian_fill(std::uint64_t seed, Domain domain, std::uint32_t unit,
                   std::uint32_t step, Eigen::Ref<Eigen::VectorXd> out) {
  const auto n = static_cast<int>(out.size());
  for (int i = 0; i < n; i += 2) {
    const auto pair = box_muller(block_at(seed, domain, unit, step,
                                          static_cast<std::uint32_t>(i / 2)));
    out[i] = pair.z0;
    if (i + 1 < n) out[i + 1] = pair.z1;
  }
}

double Sequence::uniform() {
  if (counter_ > 0xFFFFFFFFull) throw NumericError("rng sequence exhausted");
  const auto block = static_cast<std::uint32_t>(counter_++);
  return uniform01(seed_, domain_, unit_, 0, block);
}

double Sequence::normal() {
  if (counter_ > 0xFFFFFFFFull) throw NumericError("rng sequence exhausted");
  const auto block = static_cast<std::uint32_t>(counter_++);
  return box_muller(block_at(seed_, domain_, unit_, 0, block)).z0;
}

Eigen::VectorXd Sequence::normal_vector(int dim) {
  Eigen::VectorXd out(dim);
  for (int i = 0; i < dim; ++i) out[i] = normal();
  return out;
}

int Sequence::uniform_index(int n) {
  if (n <= 0) throw NumericError("uniform_index needs n > 0");
  const auto idx = static_cast<int>(uniform() * n);
  return idx < n ? idx : n - 1;
}

}  // namespace spell::rng
