#include "threetank/decoupling.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace threetank::decoupling {

namespace {

constexpr double kHessianStep = 1e-6;
constexpr int kMaxDegree = 3;

Mat3 numeric_hessian(const ScalarField& phi, const Vec3& x) {
  Mat3 hess;
  for (int j = 0; j < 3; ++j) {
    Vec3 plus = x;
    Vec3 minus = x;
    plus[j] += kHessianStep;
    minus[j] -= kHessianStep;
    hess.col(j) = (phi.gradient(plus) - phi.gradient(minus)) / (2.0 * kHessianStep);
  }
  return 0.5 * (hess + hess.transpose());
}

}  // namespace

ScalarField linear_output(const Vec3& c) {
  return ScalarField{
      [c](const Vec3& x) { return c.dot(x); },
      [c](const Vec3&) { return c; },
      true,
  };
}

Mat3 three_tank_drift_jacobian(const Vec3& x, const plant::PlantParams& params) {
  const double d13 = std::abs(x[0] - x[2]);
  const double d32 = std::abs(x[2] - x[1]);
  if (d13 < plant::kHeadEpsilon || d32 < plant::kHeadEpsilon || x[1] <= 0.0) {
    std::ostringstream msg;
    msg << "drift is not differentiable at (" << x[0] << ", " << x[1] << ", " << x[2] << ")";
    throw NumericalError(msg.str());
  }
  const double scale = params.pipe_area * std::sqrt(2.0 * params.gravity) / (2.0 * params.tank_area);
  const double a13 = params.mu13 * scale / std::sqrt(d13);
  const double a32 = params.mu32 * scale / std::sqrt(d32);
  const double a20 = params.mu20 * scale / std::sqrt(x[1]);
  Mat3 jac;
  // clang-format off
  jac << -a13,  0.0,        a13,
          0.0, -a32 - a20,  a32,
          a13,  a32,       -a13 - a32;
  // clang-format on
  return jac;
}

AffineSystem three_tank_system(const plant::PlantParams& params) {
  AffineSystem sys;
  sys.drift.value = [params](const Vec3& x) {
    return plant::derivatives(plant::PlantState{x}, plant::PumpInput{}, params);
  };
  sys.drift.jacobian = [params](const Vec3& x) { return three_tank_drift_jacobian(x, params); };
  for (int i = 0; i < 2; ++i) {
    Vec3 column = Vec3::Zero();
    column[i] = 1.0 / params.tank_area;
    sys.input_fields[static_cast<std::size_t>(i)] = VectorField{
        [column](const Vec3&) { return column; },
        [](const Vec3&) { return Mat3::Zero().eval(); },
    };
  }
  sys.outputs[0] = linear_output(Vec3::UnitX());
  sys.outputs[1] = linear_output(Vec3::UnitY());
  return sys;
}

double lie_derivative(const VectorField& f, const ScalarField& phi, const Vec3& x) {
  return phi.gradient(x).dot(f.value(x));
}

ScalarField lie_derivative_field(const VectorField& f, const ScalarField& phi) {
  ScalarField out;
  out.value = [f, phi](const Vec3& x) { return lie_derivative(f, phi, x); };
  out.gradient = [f, phi](const Vec3& x) -> Vec3 {
    Vec3 grad = f.jacobian(x).transpose() * phi.gradient(x);
    if (!phi.constant_gradient) grad += numeric_hessian(phi, x) * f.value(x);
    return grad;
  };
  return out;
}

ScalarField iterated_lie_derivative(const VectorField& f, const ScalarField& phi, int k) {
  if (k < 0) throw ConfigError("Lie derivative order must be >= 0");
  ScalarField current = phi;
  for (int i = 0; i < k; ++i) current = lie_derivative_field(f, current);
  return current;
}

std::vector<Vec3> default_probe_points(const Vec3& center, double delta) {
  std::vector<Vec3> probes{center};
  for (int mask = 0; mask < 8; ++mask) {
    Vec3 p = center;
    for (int j = 0; j < 3; ++j) p[j] += ((mask >> j) & 1) ? delta : -delta;
    probes.push_back(p);
  }
  return probes;
}

std::optional<int> relative_degree(const AffineSystem& sys, const ScalarField& output,
                                   const std::vector<Vec3>& probes) {
  ScalarField chain = output;  // L_drift^{l-1} H
  for (int l = 1; l <= kMaxDegree; ++l) {
    for (const auto& x : probes) {
      for (const auto& field : sys.input_fields) {
        try {
          if (std::abs(lie_derivative(field, chain, x)) > kZeroThreshold) return l;
        } catch (const NumericalError&) {
          // probe sits where the chain is not differentiable
        }
      }
    }
    chain = lie_derivative_field(sys.drift, chain);
  }
  return std::nullopt;
}

std::optional<int> relative_degree(const AffineSystem& sys, int output,
                                   const std::vector<Vec3>& probes) {
  if (output < 0 || output > 1) throw ConfigError("output index must be 0 or 1");
  return relative_degree(sys, sys.outputs[static_cast<std::size_t>(output)], probes);
}

DecouplingMatrices decoupling_matrices(const AffineSystem& sys, const std::array<int, 2>& degrees,
                                       const Vec3& x) {
  DecouplingMatrices out;
  for (std::size_t i = 0; i < 2; ++i) {
    if (degrees[i] < 1) throw ConfigError("relative degrees must be >= 1");
    const ScalarField chain = iterated_lie_derivative(sys.drift, sys.outputs[i], degrees[i] - 1);
    for (std::size_t j = 0; j < 2; ++j) {
      out.lambda(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          lie_derivative(sys.input_fields[j], chain, x);
    }
    out.lambda0[static_cast<Eigen::Index>(i)] = lie_derivative(sys.drift, chain, x);
  }
  Eigen::JacobiSVD<Mat2> svd(out.lambda);
  const auto& s = svd.singularValues();
  if (!(s[0] > 0.0) || s[1] / s[0] < 1e-12) {
    throw NumericalError("decoupling matrix is singular");
  }
  return out;
}

DecouplingLaw make_decoupling_law(const plant::PlantParams& params, const Vec2& outer_gains,
                                  const Vec3& center) {
  if (!(outer_gains[0] > 0.0) || !(outer_gains[1] > 0.0) || !outer_gains.allFinite()) {
    throw ConfigError("outer-loop gains must be finite and > 0");
  }
  DecouplingLaw law;
  law.system = three_tank_system(params);
  law.outer_gains = outer_gains;
  law.q_max = params.q_max;
  const auto probes = default_probe_points(center);
  for (int i = 0; i < 2; ++i) {
    const auto degree = relative_degree(law.system, i, probes);
    if (!degree) {
      throw NumericalError("relative degree of output " + std::to_string(i + 1) + " is undefined");
    }
    law.relative_degrees[static_cast<std::size_t>(i)] = *degree;
  }
  return law;
}

FeedbackCommand linearizing_feedback(const DecouplingLaw& law, const Vec3& x, const Vec2& zeta) {
  const auto m = decoupling_matrices(law.system, law.relative_degrees, x);
  FeedbackCommand cmd;
  cmd.u_raw = m.lambda.fullPivLu().solve(zeta - m.lambda0);
  cmd.u = cmd.u_raw;
  for (int i = 0; i < 2; ++i) {
    const double clamped = std::clamp(cmd.u_raw[i], 0.0, law.q_max);
    cmd.saturated[static_cast<std::size_t>(i)] = clamped != cmd.u_raw[i];
    cmd.u[i] = clamped;
  }
  return cmd;
}

Vec2 outer_loop(const DecouplingLaw& law, const Vec2& y_r, const Vec2& h) {
  return law.outer_gains.cwiseProduct(y_r - h);
}

}  // namespace threetank::decoupling
