#include "threetank/akf.hpp"

#include <cmath>

namespace threetank::akf {

namespace {

Mat3 symmetrize(const Mat3& m) { return 0.5 * (m + m.transpose()); }

bool symmetric_positive_definite(const Mat3& m) {
  if (!m.allFinite() || !m.isApprox(m.transpose(), 1e-12)) return false;
  Eigen::LLT<Mat3> llt(m);
  return llt.info() == Eigen::Success;
}

void push_bounded(std::deque<Vec3>& window, const Vec3& v, std::size_t capacity) {
  window.push_back(v);
  while (window.size() > capacity) window.pop_front();
}

}  // namespace

void AkfConfig::validate() const {
  if (window < 2) throw ConfigError("AKF window must hold at least 2 samples");
  if (!symmetric_positive_definite(P0)) throw ConfigError("P0 must be symmetric positive definite");
  if (!symmetric_positive_definite(R)) throw ConfigError("R must be symmetric positive definite");
  if (!Q0.allFinite() || !Q0.isApprox(Q0.transpose(), 1e-12)) throw ConfigError("Q0 must be symmetric");
  if (!(q_min > 0.0) || !(q_min <= q_max) || !std::isfinite(q_max)) {
    throw ConfigError("Q bounds must satisfy 0 < q_min <= q_max < inf");
  }
  if (!(r_min > 0.0) || !(r_min <= r_max) || !std::isfinite(r_max)) {
    throw ConfigError("R bounds must satisfy 0 < r_min <= r_max < inf");
  }
}

AkfState initial_state(const Vec3& x0, const AkfConfig& cfg) {
  AkfState st;
  st.x_hat = x0;
  st.x_prior = x0;
  st.P = cfg.P0;
  st.P_prev = cfg.P0;
  st.Q_hat = cfg.Q0;
  st.capacity = static_cast<std::size_t>(cfg.window);
  return st;
}

Mat3 transition_jacobian(const linmodel::DiscreteModel& dm, const Vec3& /*x_hat*/, const Vec2& /*u*/) {
  return dm.A_d;
}

Gaussian kf_predict(const Gaussian& prior, const Eigen::MatrixXd& F, const Eigen::VectorXd& drive,
                    const Eigen::MatrixXd& Q) {
  Gaussian next;
  next.mean = F * prior.mean + drive;
  const Eigen::MatrixXd cov = F * prior.cov * F.transpose() + Q;
  next.cov = 0.5 * (cov + cov.transpose());
  return next;
}

KfUpdate kf_update(const Gaussian& prior, const Eigen::VectorXd& y, const Eigen::MatrixXd& H,
                   const Eigen::MatrixXd& R) {
  const Eigen::MatrixXd S = H * prior.cov * H.transpose() + R;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(S);
  if (!S.allFinite() || !lu.isInvertible()) {
    throw NumericalError("innovation covariance H P H^T + R is singular");
  }
  KfUpdate out;
  out.gain = prior.cov * H.transpose() * lu.inverse();
  out.posterior.mean = prior.mean + out.gain * (y - H * prior.mean);
  const auto n = prior.cov.rows();
  const Eigen::MatrixXd cov = (Eigen::MatrixXd::Identity(n, n) - out.gain * H) * prior.cov;
  out.posterior.cov = 0.5 * (cov + cov.transpose());
  if (!out.posterior.mean.allFinite() || !out.posterior.cov.allFinite()) {
    throw NumericalError("Kalman update produced non-finite values");
  }
  return out;
}

AkfState predict(const AkfState& st, const linmodel::DiscreteModel& dm, const Vec2& u) {
  const Mat3 F = transition_jacobian(dm, st.x_hat, u);
  const Gaussian g = kf_predict(Gaussian{st.x_hat, st.P}, F, dm.B_d * u, st.Q_hat);
  AkfState next = st;
  next.P_prev = st.P;
  next.x_hat = g.mean;
  next.x_prior = next.x_hat;
  next.P = g.cov;
  return next;
}

AkfState update(const AkfState& st, const Vec3& y, const Mat3& H, const Mat3& R) {
  const KfUpdate u = kf_update(Gaussian{st.x_hat, st.P}, y, H, R);
  AkfState next = st;
  next.x_hat = u.posterior.mean;
  next.P = u.posterior.cov;
  next.K_last = u.gain;
  push_bounded(next.residual_window, y - H * next.x_hat, st.capacity);
  push_bounded(next.dx_window, next.x_hat - st.x_hat, st.capacity);
  return next;
}

Mat3 residual_covariance(const AkfState& st) {
  if (st.residual_window.empty()) throw NumericalError("residual window is empty");
  Mat3 sum = Mat3::Zero();
  for (const auto& v : st.residual_window) sum += v * v.transpose();
  return sum / static_cast<double>(st.residual_window.size());
}

Mat3 clamp_eigenvalues(const Mat3& m, double lo, double hi) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(symmetrize(m));
  if (es.info() != Eigen::Success) throw NumericalError("eigen-decomposition of Q candidate failed");
  const Vec3 clamped = es.eigenvalues().cwiseMax(lo).cwiseMin(hi);
  return symmetrize(es.eigenvectors() * clamped.asDiagonal() * es.eigenvectors().transpose());
}

AkfState adapt_q(const AkfState& st, const AkfConfig& cfg, const Mat3& F) {
  const auto psi = static_cast<std::size_t>(cfg.window);
  if (st.dx_window.size() < psi || st.residual_window.size() < psi) return st;

  Mat3 candidate;
  if (cfg.estimator == QEstimator::StateCorrection) {
    Mat3 q_alpha = Mat3::Zero();
    for (const auto& dx : st.dx_window) q_alpha += dx * dx.transpose();
    q_alpha /= static_cast<double>(st.dx_window.size());
    candidate = q_alpha + st.P - F * st.P_prev * F.transpose();
  } else {
    candidate = st.K_last * residual_covariance(st) * st.K_last.transpose();
  }
  AkfState next = st;
  next.Q_hat = clamp_eigenvalues(candidate, cfg.q_min, cfg.q_max);
  return next;
}

AkfState akf_step(const AkfState& st, const linmodel::DiscreteModel& dm, const Vec2& u,
                  const Vec3& y, const AkfConfig& cfg) {
  const Mat3 F = transition_jacobian(dm, st.x_hat, u);
  AkfState next = update(predict(st, dm, u), y, dm.C, cfg.R);
  if (cfg.adapt) next = adapt_q(next, cfg, F);
  return next;
}

}  // namespace threetank::akf
