#pragma once

#include "threetank/plant.hpp"
#include "threetank/types.hpp"

#include <array>
#include <functional>
#include <optional>
#include <vector>

namespace threetank::decoupling {

// Scalar map with analytic gradient. `constant_gradient` marks affine maps
// so their Hessian is taken as exactly zero.
struct ScalarField {
  std::function<double(const Vec3&)> value;
  std::function<Vec3(const Vec3&)> gradient;
  bool constant_gradient = false;
};

// Vector field with Jacobian. The Jacobian may throw NumericalError where
// the field is not differentiable.
struct VectorField {
  std::function<Vec3(const Vec3&)> value;
  std::function<Mat3(const Vec3&)> jacobian;
};

// Input-affine system dx/dt = drift(x) + sum_i input_fields[i](x) u_i,
// y_i = outputs[i](x).
struct AffineSystem {
  VectorField drift;
  std::array<VectorField, 2> input_fields;
  std::array<ScalarField, 2> outputs;
};

// H(x) = c . x
ScalarField linear_output(const Vec3& c);

// The three-tank plant with outputs h1 and h2.
AffineSystem three_tank_system(const plant::PlantParams& params);

// Drift Jacobian of the three-tank plant, valid for any level ordering as
// long as no coupled pair of levels coincides and h2 > 0.
Mat3 three_tank_drift_jacobian(const Vec3& x, const plant::PlantParams& params);

// L_f phi at x = grad(phi)(x) . f(x)
double lie_derivative(const VectorField& f, const ScalarField& phi, const Vec3& x);

// L_f phi as a field of its own, so it can be differentiated again.
// grad(L_f phi) = J_f^T grad(phi) + Hess(phi) f; the Hessian term uses
// central differences of grad(phi) unless phi has a constant gradient.
ScalarField lie_derivative_field(const VectorField& f, const ScalarField& phi);

// L_f^k phi, with L_f^0 phi = phi.
ScalarField iterated_lie_derivative(const VectorField& f, const ScalarField& phi, int k);

// Threshold below which a Lie derivative counts as zero.
inline constexpr double kZeroThreshold = 1e-12;

// Operating point plus its eight (+-delta, +-delta, +-delta) neighbours.
std::vector<Vec3> default_probe_points(const Vec3& center, double delta = 0.01);

// Smallest l in [1, 3] with L_{xi_j} L_drift^{l-1} H_i != 0 for some input j
// at some probe point; nullopt when none qualifies.
std::optional<int> relative_degree(const AffineSystem& sys, int output,
                                   const std::vector<Vec3>& probes);

// Same test for an arbitrary output map.
std::optional<int> relative_degree(const AffineSystem& sys, const ScalarField& output,
                                   const std::vector<Vec3>& probes);

struct DecouplingMatrices {
  Mat2 lambda;   // decoupling matrix
  Vec2 lambda0;  // L_drift^{degree_i} H_i
};

// Throws NumericalError when the decoupling matrix is singular at x.
DecouplingMatrices decoupling_matrices(const AffineSystem& sys, const std::array<int, 2>& degrees,
                                       const Vec3& x);

struct DecouplingLaw {
  AffineSystem system;
  std::array<int, 2> relative_degrees{1, 1};
  Vec2 outer_gains = Vec2(0.02, 0.02);  // [1/s]
  double q_max = 1.2e-4;
};

// Builds the law for the plant; relative degrees are probed around `center`.
// Throws ConfigError for non-positive gains and NumericalError when a
// relative degree is undefined.
DecouplingLaw make_decoupling_law(const plant::PlantParams& params, const Vec2& outer_gains,
                                  const Vec3& center);

struct FeedbackCommand {
  Vec2 u;        // clamped pump command [m^3/s]
  Vec2 u_raw;    // before clamping
  std::array<bool, 2> saturated{false, false};
};

// u = Lambda^-1 (zeta - Lambda0), clamped to [0, q_max].
FeedbackCommand linearizing_feedback(const DecouplingLaw& law, const Vec3& x, const Vec2& zeta);

// zeta_i = K_i (y_r,i - h_i)
Vec2 outer_loop(const DecouplingLaw& law, const Vec2& y_r, const Vec2& h);

}  // namespace threetank::decoupling
