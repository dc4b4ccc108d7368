#include "threetank/plant.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace threetank::plant {

namespace {

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw ConfigError(std::string("plant parameter '") + name + "' must be finite and > 0");
  }
}

void merge(Saturation* into, const Saturation& from) {
  if (into == nullptr) return;
  into->input[0] = into->input[0] || from.input[0];
  into->input[1] = into->input[1] || from.input[1];
  into->level = into->level || from.level;
}

PlantState clamp_levels(Vec3 h, const PlantParams& params, Saturation* sat) {
  for (int i = 0; i < 3; ++i) {
    const double clamped = std::clamp(h[i], 0.0, params.h_max);
    if (clamped != h[i] && sat != nullptr) sat->level = true;
    h[i] = clamped;
  }
  return PlantState{h};
}

void require_finite(const PlantState& state, double dt) {
  if (!std::isfinite(dt) || !(dt > 0.0)) {
    throw NumericalError("integration step must be finite and > 0, got " + std::to_string(dt));
  }
  if (!state.h.allFinite()) {
    throw NumericalError("plant state is not finite");
  }
}

}  // namespace

void PlantParams::validate() const {
  require_positive(tank_area, "tank_area");
  require_positive(pipe_area, "pipe_area");
  require_positive(mu13, "mu13");
  require_positive(mu32, "mu32");
  require_positive(mu20, "mu20");
  require_positive(gravity, "gravity");
  require_positive(q_max, "q_max");
  require_positive(h_max, "h_max");
  if (mu13 > 1.0 || mu32 > 1.0 || mu20 > 1.0) {
    throw ConfigError("outflow coefficients must lie in (0, 1]");
  }
}

double flow_between(double h_a, double h_b, double mu, const PlantParams& params) {
  const double diff = h_a - h_b;
  if (std::abs(diff) < kHeadEpsilon) return 0.0;
  const double magnitude = mu * params.pipe_area * std::sqrt(2.0 * params.gravity * std::abs(diff));
  return diff > 0.0 ? magnitude : -magnitude;
}

double outflow(double h2, const PlantParams& params) {
  if (h2 <= 0.0) return 0.0;
  return params.mu20 * params.pipe_area * std::sqrt(2.0 * params.gravity * h2);
}

Vec3 derivatives(const PlantState& state, const PumpInput& u, const PlantParams& params) {
  const Vec3& h = state.h;
  const double q13 = flow_between(h[0], h[2], params.mu13, params);
  const double q32 = flow_between(h[2], h[1], params.mu32, params);
  const double q20 = outflow(h[1], params);
  const double inv_area = 1.0 / params.tank_area;
  return Vec3((u.q[0] - q13) * inv_area,
              (u.q[1] + q32 - q20) * inv_area,
              (q13 - q32) * inv_area);
}

PumpInput clamp_input(const PumpInput& u, const PlantParams& params, Saturation* sat) {
  PumpInput out = u;
  for (int i = 0; i < 2; ++i) {
    out.q[i] = std::clamp(u.q[i], 0.0, params.q_max);
    // NaN inputs are clamped to 0 as well
    if (std::isnan(u.q[i])) out.q[i] = 0.0;
    if (out.q[i] != u.q[i] && sat != nullptr) sat->input[static_cast<std::size_t>(i)] = true;
  }
  return out;
}

PlantState step(const PlantState& state, const PumpInput& u, double dt,
                const PlantParams& params, Saturation* sat) {
  require_finite(state, dt);
  const PumpInput applied = clamp_input(u, params, sat);
  const Vec3& h = state.h;
  const Vec3 k1 = derivatives(PlantState{h}, applied, params);
  const Vec3 k2 = derivatives(PlantState{h + 0.5 * dt * k1}, applied, params);
  const Vec3 k3 = derivatives(PlantState{h + 0.5 * dt * k2}, applied, params);
  const Vec3 k4 = derivatives(PlantState{h + dt * k3}, applied, params);
  return clamp_levels(h + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), params, sat);
}

PlantState step(const PlantState& state, const FeedbackPolicy& policy, double dt,
                const PlantParams& params, Saturation* sat) {
  require_finite(state, dt);
  auto rhs = [&](const Vec3& h) {
    const PlantState stage{h};
    return derivatives(stage, clamp_input(policy(stage), params, sat), params);
  };
  const Vec3& h = state.h;
  const Vec3 k1 = rhs(h);
  const Vec3 k2 = rhs(h + 0.5 * dt * k1);
  const Vec3 k3 = rhs(h + 0.5 * dt * k2);
  const Vec3 k4 = rhs(h + dt * k3);
  return clamp_levels(h + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), params, sat);
}

namespace {

template <typename Input>
PlantState advance_impl(const PlantState& state, const Input& input, double duration,
                        const PlantParams& params, double max_dt, Saturation* sat) {
  if (!std::isfinite(duration) || !(duration > 0.0)) {
    throw NumericalError("integration horizon must be finite and > 0");
  }
  if (!std::isfinite(max_dt) || !(max_dt > 0.0)) {
    throw NumericalError("maximum sub-step must be finite and > 0");
  }
  const auto substeps = static_cast<long>(std::ceil(duration / max_dt - 1e-9));
  const long n = std::max(1L, substeps);
  const double dt = duration / static_cast<double>(n);
  PlantState current = state;
  Saturation local;
  for (long i = 0; i < n; ++i) {
    current = step(current, input, dt, params, &local);
  }
  merge(sat, local);
  return current;
}

}  // namespace

PlantState advance(const PlantState& state, const PumpInput& u, double duration,
                   const PlantParams& params, double max_dt, Saturation* sat) {
  return advance_impl(state, u, duration, params, max_dt, sat);
}

PlantState advance(const PlantState& state, const FeedbackPolicy& policy, double duration,
                   const PlantParams& params, double max_dt, Saturation* sat) {
  return advance_impl(state, policy, duration, params, max_dt, sat);
}

PumpInput equilibrium_input(const Vec3& h, const PlantParams& params) {
  const double q13 = flow_between(h[0], h[2], params.mu13, params);
  const double q32 = flow_between(h[2], h[1], params.mu32, params);
  const double q20 = outflow(h[1], params);
  return PumpInput{Vec2(q13, q20 - q32)};
}

}  // namespace threetank::plant
