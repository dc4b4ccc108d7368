#pragma once

#include "threetank/plant.hpp"
#include "threetank/types.hpp"

namespace threetank::linmodel {

// Input/output pair about which the plant is linearized.
struct OperatingPoint {
  Vec2 u0 = Vec2::Zero();  // [m^3/s]
  Vec3 y0 = Vec3::Zero();  // [m]
};

// Minimum gap between levels for the ordering h1 > h3 > h2.
inline constexpr double kOrderingGap = 1e-6;

// True when y0 satisfies h1 > h3 > h2 (with gaps) and h2 > 0.
bool admits_ordering(const Vec3& y0);

// Continuous-time linearization dx/dt = F x + B u, y = C x.
struct ContinuousModel {
  Mat3 F = Mat3::Zero();   // [1/s]
  Mat32 B = Mat32::Zero(); // [1/m^2]
  Mat3 C = Mat3::Identity();
};

// Zero-order-hold sampled model x(k+1) = A_d x(k) + B_d u(k), y = C x.
struct DiscreteModel {
  Mat3 A_d = Mat3::Identity();
  Mat32 B_d = Mat32::Zero();
  Mat3 C = Mat3::Identity();
  double t_s = 1.0;  // [s]
};

// Analytic Jacobian of the mass-balance equations at y0 under h1 > h3 > h2.
// Throws ConfigError when y0 violates the ordering.
ContinuousModel jacobian_at(const plant::PlantParams& params, const Vec3& y0);

// exp(M) by scaling and squaring with a truncated Taylor series.
Eigen::MatrixXd expm(const Eigen::MatrixXd& m);

// Exact ZOH discretization through the exponential of [[F, B], [0, 0]] * t_s.
DiscreteModel discretize(const ContinuousModel& cm, double t_s);

struct Deviation {
  Vec3 y;
  Vec2 u;
};

Deviation to_deviation(const Vec3& Y, const Vec2& U, const OperatingPoint& op);

struct Absolute {
  Vec3 Y;
  Vec2 U;
};

Absolute from_deviation(const Vec3& y, const Vec2& u, const OperatingPoint& op);

}  // namespace threetank::linmodel
