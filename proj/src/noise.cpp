#include "threetank/noise.hpp"

#include <cmath>
#include <numbers>

namespace threetank::harness {

double GaussianSource::uniform() {
  return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
}

double GaussianSource::standard_normal() {
  if (spare_) {
    const double z = *spare_;
    spare_.reset();
    return z;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  return r * std::cos(theta);
}

Vec3 add_measurement_noise(const Vec3& y, const Vec3& sigma, GaussianSource& rng) {
  Vec3 out = y;
  for (int i = 0; i < 3; ++i) {
    const double eps = rng.standard_normal();
    if (sigma[i] != 0.0) out[i] += sigma[i] * eps;
  }
  return out;
}

}  // namespace threetank::harness
