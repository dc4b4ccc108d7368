#pragma once

#include "threetank/linmodel.hpp"
#include "threetank/types.hpp"

#include <deque>

namespace threetank::akf {

enum class QEstimator {
  StateCorrection,     // Q_alpha + P_k - F P_{k-1} F^T from windowed dx = x_k - x_k^+
  ResidualProjection,  // K_k C_v K_k^T from windowed post-fit residuals
};

struct AkfConfig {
  int window = 30;                  // samples per adaptation window
  Mat3 Q0 = 1e-12 * Mat3::Identity();
  Mat3 R = 25.0 * Mat3::Identity();
  Mat3 P0 = 10.0 * Mat3::Identity();
  double q_min = 1e-14;
  double q_max = 1e-2;
  double r_min = 1e-12;             // validated only; R is fixed
  double r_max = 1e3;
  bool adapt = true;
  QEstimator estimator = QEstimator::StateCorrection;

  // Throws ConfigError when the invariants do not hold.
  void validate() const;
};

struct AkfState {
  Vec3 x_hat = Vec3::Zero();
  Mat3 P = Mat3::Identity();       // P_k (after update) or P_k^+ (after predict)
  Mat3 P_prev = Mat3::Identity();  // P_{k-1}, kept for the adaptive Q update
  Mat3 Q_hat = Mat3::Zero();
  Vec3 x_prior = Vec3::Zero();     // x_k^+ from the latest predict
  std::deque<Vec3> residual_window;
  std::deque<Vec3> dx_window;
  Mat3 K_last = Mat3::Zero();
  std::size_t capacity = 30;
};

// Dimension-generic Kalman recursion shared by the three-level filter.
struct Gaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// mean <- F mean + drive, cov <- F cov F^T + Q (symmetrized)
Gaussian kf_predict(const Gaussian& prior, const Eigen::MatrixXd& F, const Eigen::VectorXd& drive,
                    const Eigen::MatrixXd& Q);

struct KfUpdate {
  Gaussian posterior;
  Eigen::MatrixXd gain;
};

// Standard measurement update; throws NumericalError when H P H^T + R is singular.
KfUpdate kf_update(const Gaussian& prior, const Eigen::VectorXd& y, const Eigen::MatrixXd& H,
                   const Eigen::MatrixXd& R);

AkfState initial_state(const Vec3& x0, const AkfConfig& cfg);

// f_e is affine, so the Jacobian is A_d for every x_hat and u.
Mat3 transition_jacobian(const linmodel::DiscreteModel& dm, const Vec3& x_hat, const Vec2& u);

AkfState predict(const AkfState& st, const linmodel::DiscreteModel& dm, const Vec2& u);

// Measurement update. Pushes the post-fit residual y - H x_hat and the
// correction x_hat - x_prior into the windows. Throws NumericalError when
// the innovation covariance is singular.
AkfState update(const AkfState& st, const Vec3& y, const Mat3& H, const Mat3& R);

// Mean outer product of the residuals currently in the window.
Mat3 residual_covariance(const AkfState& st);

// Symmetrizes, then clamps eigenvalues into [lo, hi].
Mat3 clamp_eigenvalues(const Mat3& m, double lo, double hi);

// Replaces Q_hat with the windowed estimate, clamped into [q_min, q_max].
// Leaves the state untouched until both windows are full.
AkfState adapt_q(const AkfState& st, const AkfConfig& cfg, const Mat3& F);

// predict -> update (H = C) -> adapt_q.
AkfState akf_step(const AkfState& st, const linmodel::DiscreteModel& dm, const Vec2& u,
                  const Vec3& y, const AkfConfig& cfg);

}  // namespace threetank::akf
