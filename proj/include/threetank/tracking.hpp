#pragma once

#include "threetank/linmodel.hpp"
#include "threetank/types.hpp"

#include <array>
#include <complex>
#include <vector>

namespace threetank::tracking {

// Plant model with two output integrators appended:
//   x_e(k+1) = Abar x_e(k) + Bbar u(k) + Br y_r(k),  y = Cbar x_e
// where x_e = [x; z] and z integrates y_r - C1 x, C1 = rows 1-2 of C.
struct AugmentedModel {
  Mat5 Abar = Mat5::Zero();
  Mat52 Bbar = Mat52::Zero();
  Mat52 Br = Mat52::Zero();
  Mat35 Cbar = Mat35::Zero();
  double t_s = 1.0;
};

struct TrackingGain {
  Mat25 K = Mat25::Zero();

  Mat23 K1() const { return K.leftCols<3>(); }
  Mat2 K2() const { return K.rightCols<2>(); }
};

struct TrackingState {
  Vec2 z = Vec2::Zero();  // integrated tracking error [m*s]
};

using Spectrum = std::vector<std::complex<double>>;

// Controllability of (a, b) by the PBH test at every eigenvalue of a.
bool is_controllable(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double tol = 1e-9);

// Numerical rank of [b, ab, ..., a^(n-1) b].
int controllability_rank(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double tol = 1e-10);

// Builds the integrator-augmented blocks. Throws NumericalError when
// (Abar, Bbar) is not controllable.
AugmentedModel augment(const linmodel::DiscreteModel& dm);

// z <- z + t_s (y_r - y1)
TrackingState integrator_step(const TrackingState& ts, const Vec2& y_r, const Vec2& y1, double t_s);

// Same, but channels flagged in `freeze` keep their previous value.
TrackingState integrator_step(const TrackingState& ts, const Vec2& y_r, const Vec2& y1, double t_s,
                              const std::array<bool, 2>& freeze);

// Generic multi-input eigenstructure assignment: returns K with
// eig(a - b K) = poles. `poles` must be closed under conjugation.
Eigen::MatrixXd place(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Spectrum& poles);

// Pole placement on the augmented model. Throws NumericalError when the
// requested spectrum cannot be assigned, ConfigError on malformed requests.
TrackingGain place_poles(const AugmentedModel& am, const Spectrum& poles);

Mat5 closed_loop_matrix(const AugmentedModel& am, const TrackingGain& gain);

// Eigenvalues of a square matrix.
Spectrum eigenvalues(const Eigen::MatrixXd& m);

// Largest distance between the two spectra under the best one-to-one pairing.
double spectrum_distance(const Spectrum& a, const Spectrum& b);

// True when every pole lies strictly inside the unit disk.
bool inside_unit_disk(const Spectrum& poles);

// u = -K1 x - K2 z, all in deviation variables.
Vec2 control(const TrackingGain& gain, const Vec3& x, const TrackingState& ts);

}  // namespace threetank::tracking
