#include "threetank/linmodel.hpp"

#include <cmath>
#include <sstream>

namespace threetank::linmodel {

bool admits_ordering(const Vec3& y0) {
  return y0.allFinite() && y0[0] - y0[2] > kOrderingGap && y0[2] - y0[1] > kOrderingGap &&
         y0[1] > kOrderingGap;
}

ContinuousModel jacobian_at(const plant::PlantParams& params, const Vec3& y0) {
  if (!admits_ordering(y0)) {
    std::ostringstream msg;
    msg << "operating point (" << y0[0] << ", " << y0[1] << ", " << y0[2]
        << ") violates the ordering h1 > h3 > h2 > 0";
    throw ConfigError(msg.str());
  }
  const double phi = std::sqrt(2.0 * params.gravity);
  const double scale = params.pipe_area * phi / (2.0 * params.tank_area);
  // d/dh of mu*Phi*sqrt(2g*d) is mu*Phi*phi / (2 sqrt(d)); divided by A
  const double a13 = params.mu13 * scale / std::sqrt(y0[0] - y0[2]);
  const double a32 = params.mu32 * scale / std::sqrt(y0[2] - y0[1]);
  const double a20 = params.mu20 * scale / std::sqrt(y0[1]);

  ContinuousModel cm;
  // clang-format off
  cm.F << -a13,  0.0,         a13,
           0.0, -a32 - a20,   a32,
           a13,  a32,        -a13 - a32;
  // clang-format on
  cm.B.setZero();
  cm.B(0, 0) = 1.0 / params.tank_area;
  cm.B(1, 1) = 1.0 / params.tank_area;
  cm.C.setIdentity();
  return cm;
}

Eigen::MatrixXd expm(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw NumericalError("expm: matrix must be square");
  if (!m.allFinite()) throw NumericalError("expm: matrix is not finite");

  // Scale so that ||m / 2^s||_1 <= 0.5, where 18 Taylor terms reach 1e-16.
  const double norm = m.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Eigen::MatrixXd scaled = m / std::ldexp(1.0, squarings);

  const auto n = m.rows();
  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
  for (int k = 1; k <= 30; ++k) {
    term = term * scaled / static_cast<double>(k);
    result += term;
    if (term.cwiseAbs().maxCoeff() <= 1e-17 * result.cwiseAbs().maxCoeff()) break;
  }
  for (int i = 0; i < squarings; ++i) result = result * result;
  return result;
}

DiscreteModel discretize(const ContinuousModel& cm, double t_s) {
  if (!std::isfinite(t_s) || !(t_s > 0.0)) {
    throw ConfigError("sampling time must be finite and > 0");
  }
  Eigen::MatrixXd block = Eigen::MatrixXd::Zero(5, 5);
  block.topLeftCorner<3, 3>() = cm.F * t_s;
  block.topRightCorner<3, 2>() = cm.B * t_s;
  const Eigen::MatrixXd e = expm(block);

  DiscreteModel dm;
  dm.A_d = e.topLeftCorner<3, 3>();
  dm.B_d = e.topRightCorner<3, 2>();
  dm.C = cm.C;
  dm.t_s = t_s;
  return dm;
}

Deviation to_deviation(const Vec3& Y, const Vec2& U, const OperatingPoint& op) {
  return Deviation{Y - op.y0, U - op.u0};
}

Absolute from_deviation(const Vec3& y, const Vec2& u, const OperatingPoint& op) {
  return Absolute{y + op.y0, u + op.u0};
}

}  // namespace threetank::linmodel
