#pragma once

#include "threetank/types.hpp"

#include <array>
#include <functional>

namespace threetank::plant {

// Physical constants of the rig. Defaults are the benchmark values.
struct PlantParams {
  double tank_area = 0.0154;   // A [m^2]
  double pipe_area = 5e-5;     // Phi [m^2]
  double mu13 = 0.5;
  double mu32 = 0.5;
  double mu20 = 0.675;
  double gravity = 9.81;       // [m/s^2]
  double q_max = 1.2e-4;       // per pump [m^3/s]
  double h_max = 0.62;         // per tank [m]

  // Throws ConfigError unless every field is strictly positive and the
  // outflow coefficients lie in (0, 1].
  void validate() const;
};

struct PlantState {
  Vec3 h = Vec3::Zero();  // levels h1, h2, h3 [m]
};

struct PumpInput {
  Vec2 q = Vec2::Zero();  // pump flows q1, q2 [m^3/s]
};

// Head differences below this are treated as exactly zero.
inline constexpr double kHeadEpsilon = 1e-12;

// Torricelli flow from tank a to tank b. Antisymmetric in (h_a, h_b).
double flow_between(double h_a, double h_b, double mu, const PlantParams& params);

// Drain flow out of tank 2. Negative levels are treated as empty.
double outflow(double h2, const PlantParams& params);

// Mass-balance right-hand side dh/dt for the given (already clamped) input.
Vec3 derivatives(const PlantState& state, const PumpInput& u, const PlantParams& params);

struct Saturation {
  std::array<bool, 2> input{false, false};
  bool level = false;

  bool any_input() const { return input[0] || input[1]; }
};

// Clamps each pump flow into [0, q_max]; reports which channels were clipped.
PumpInput clamp_input(const PumpInput& u, const PlantParams& params, Saturation* sat = nullptr);

// Input as a function of the current (stage) state. Used to close a
// continuous-time feedback loop inside the integrator.
using FeedbackPolicy = std::function<PumpInput(const PlantState&)>;

// One classical RK4 step with a constant input. The input is clamped to
// [0, q_max] before integration and the levels to [0, h_max] after.
PlantState step(const PlantState& state, const PumpInput& u, double dt,
                const PlantParams& params, Saturation* sat = nullptr);

// One RK4 step where the input is re-evaluated by `policy` at every stage.
// The policy output is clamped the same way as in `step`.
PlantState step(const PlantState& state, const FeedbackPolicy& policy, double dt,
                const PlantParams& params, Saturation* sat = nullptr);

// Integrates over `duration` with equal sub-steps no longer than `max_dt`.
PlantState advance(const PlantState& state, const PumpInput& u, double duration,
                   const PlantParams& params, double max_dt = 0.1,
                   Saturation* sat = nullptr);
PlantState advance(const PlantState& state, const FeedbackPolicy& policy, double duration,
                   const PlantParams& params, double max_dt = 0.1,
                   Saturation* sat = nullptr);

// Pump flows that hold `h` at rest: (q13, q20 - q32). Components may be
// negative when `h` is not reachable with non-negative pumps.
PumpInput equilibrium_input(const Vec3& h, const PlantParams& params);

}  // namespace threetank::plant
