#pragma once

#include "threetank/types.hpp"

#include <cstdint>
#include <optional>
#include <random>

namespace threetank::harness {

// Reproducible Gaussian source: std::mt19937_64 seeded with `seed`,
// uniforms u = ((w >> 11) + 1) * 2^-53 in (0, 1] from each 64-bit word w,
// and the Box-Muller transform r = sqrt(-2 ln u1), (r cos 2pi u2, r sin 2pi u2).
// The second variate of each pair is cached and returned by the next call.
class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}

  double uniform();
  double standard_normal();

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

// y + eps with eps_i ~ N(0, sigma_i^2). Draws three variates on every call,
// also for zero sigma, so the stream position does not depend on sigma.
Vec3 add_measurement_noise(const Vec3& y, const Vec3& sigma, GaussianSource& rng);

}  // namespace threetank::harness
