#include "threetank/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>

namespace threetank::tracking {

namespace {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

constexpr double kConjugateTol = 1e-12;
constexpr double kPlacementTol = 1e-8;
constexpr int kMaxAttempts = 12;

double smallest_relative_singular_value(const Eigen::MatrixXcd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s[0] == 0.0) return 0.0;
  return s[s.size() - 1] / s[0];
}

struct Slot {
  std::complex<double> pole;
  bool pair = false;  // stands for pole and conj(pole)
};

std::vector<Slot> group_conjugates(const Spectrum& poles) {
  std::vector<Slot> slots;
  std::vector<bool> used(poles.size(), false);
  for (std::size_t i = 0; i < poles.size(); ++i) {
    if (used[i]) continue;
    const auto p = poles[i];
    if (!std::isfinite(p.real()) || !std::isfinite(p.imag())) {
      throw ConfigError("requested pole is not finite");
    }
    const double scale = std::max(1.0, std::abs(p));
    if (std::abs(p.imag()) <= kConjugateTol * scale) {
      used[i] = true;
      slots.push_back({std::complex<double>(p.real(), 0.0), false});
      continue;
    }
    std::size_t partner = poles.size();
    for (std::size_t j = i + 1; j < poles.size(); ++j) {
      if (!used[j] && std::abs(poles[j] - std::conj(p)) <= kConjugateTol * scale) {
        partner = j;
        break;
      }
    }
    if (partner == poles.size()) {
      std::ostringstream msg;
      msg << "complex pole " << p << " has no conjugate partner";
      throw ConfigError(msg.str());
    }
    used[i] = used[partner] = true;
    // canonical member has positive imaginary part
    slots.push_back({p.imag() > 0 ? p : std::conj(p), true});
  }
  return slots;
}

// Deterministic parameter vector for slot `s` on retry `attempt`.
CVector parameter(int s, int m, int attempt) {
  CVector g = CVector::Zero(m);
  g[s % m] = 1.0;
  if (attempt > 0) {
    for (int j = 0; j < m; ++j) {
      g[j] += 0.5 * std::sin(1.7 * (s + 1) * (j + 1) * attempt + 0.3 * attempt);
    }
  }
  return g;
}

// Column (x, g) with (a - pole I) x = b g, normalized.
CVector eigen_column(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                     std::complex<double> pole, const CVector& param) {
  const auto n = a.rows();
  const auto m = b.cols();
  const CMatrix shifted = a.cast<std::complex<double>>() -
                          pole * CMatrix::Identity(n, n);
  CVector v(n + m);
  if (smallest_relative_singular_value(shifted) > 1e-10) {
    v.head(n) = shifted.fullPivLu().solve(b.cast<std::complex<double>>() * param);
    v.tail(m) = param;
  } else {
    // pole coincides with an open-loop mode: pick from ker [a - pole I, -b]
    CMatrix stacked(n, n + m);
    stacked << shifted, -b.cast<std::complex<double>>();
    Eigen::JacobiSVD<CMatrix> svd(stacked, Eigen::ComputeFullV);
    const CMatrix kernel = svd.matrixV().rightCols(m);
    v = kernel * param;
  }
  const double norm = v.norm();
  if (!(norm > 0.0)) throw NumericalError("pole placement produced a zero eigenvector");
  return v / norm;
}

}  // namespace

bool is_controllable(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double tol) {
  const auto n = a.rows();
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::complex<double> mu = es.eigenvalues()[i];
    CMatrix pbh(n, n + b.cols());
    pbh << a.cast<std::complex<double>>() - mu * CMatrix::Identity(n, n),
        b.cast<std::complex<double>>();
    Eigen::JacobiSVD<CMatrix> svd(pbh);
    const auto& s = svd.singularValues();
    if (s[0] == 0.0 || s[n - 1] / s[0] <= tol) return false;
  }
  return true;
}

int controllability_rank(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double tol) {
  const auto n = a.rows();
  const auto m = b.cols();
  Eigen::MatrixXd ctrb(n, n * m);
  Eigen::MatrixXd block = b;
  for (Eigen::Index k = 0; k < n; ++k) {
    ctrb.middleCols(k * m, m) = block;
    block = a * block;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(ctrb);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s[0] == 0.0) return 0;
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] > tol * s[0]) ++rank;
  }
  return rank;
}

AugmentedModel augment(const linmodel::DiscreteModel& dm) {
  AugmentedModel am;
  const double ts = dm.t_s;
  const Mat23 c1 = dm.C.topRows<2>();
  am.Abar.setZero();
  am.Abar.topLeftCorner<3, 3>() = dm.A_d;
  am.Abar.bottomLeftCorner<2, 3>() = -ts * c1;
  am.Abar.bottomRightCorner<2, 2>().setIdentity();
  am.Bbar.setZero();
  am.Bbar.topRows<3>() = dm.B_d;
  am.Br.setZero();
  am.Br.bottomRows<2>() = ts * Mat2::Identity();
  am.Cbar.setZero();
  am.Cbar.leftCols<3>() = dm.C;
  am.t_s = ts;
  if (!is_controllable(am.Abar, am.Bbar)) {
    throw NumericalError("augmented pair (Abar, Bbar) is not controllable");
  }
  return am;
}

TrackingState integrator_step(const TrackingState& ts, const Vec2& y_r, const Vec2& y1, double t_s) {
  return TrackingState{ts.z + t_s * (y_r - y1)};
}

TrackingState integrator_step(const TrackingState& ts, const Vec2& y_r, const Vec2& y1, double t_s,
                              const std::array<bool, 2>& freeze) {
  TrackingState next = integrator_step(ts, y_r, y1, t_s);
  for (int i = 0; i < 2; ++i) {
    if (freeze[static_cast<std::size_t>(i)]) next.z[i] = ts.z[i];
  }
  return next;
}

Spectrum eigenvalues(const Eigen::MatrixXd& m) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  if (es.info() != Eigen::Success) throw NumericalError("eigenvalue computation failed");
  Spectrum out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = es.eigenvalues()[i];
  return out;
}

double spectrum_distance(const Spectrum& a, const Spectrum& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  std::vector<std::size_t> perm(a.size());
  std::iota(perm.begin(), perm.end(), 0);
  if (a.size() > 8) {
    // greedy pairing; exhaustive search is only affordable for small spectra
    std::vector<bool> taken(b.size(), false);
    double worst = 0.0;
    for (const auto& p : a) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_j = 0;
      for (std::size_t j = 0; j < b.size(); ++j) {
        if (!taken[j] && std::abs(p - b[j]) < best) {
          best = std::abs(p - b[j]);
          best_j = j;
        }
      }
      taken[best_j] = true;
      worst = std::max(worst, best);
    }
    return worst;
  }
  double best = std::numeric_limits<double>::infinity();
  do {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[perm[i]]));
    best = std::min(best, worst);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

namespace {

// Expands canonical slots into the full ordered pole list (pairs adjacent).
Spectrum expand(const std::vector<Slot>& slots) {
  Spectrum out;
  for (const auto& s : slots) {
    out.push_back(s.pole);
    if (s.pair) out.push_back(std::conj(s.pole));
  }
  return out;
}

// Gain from closed-loop eigenvectors: B K = A - X diag(poles) X^-1, solved
// through B = [U0 U1] [Z; 0].
std::optional<Eigen::MatrixXd> gain_from_eigenvectors(const Eigen::MatrixXd& a, const CMatrix& u0,
                                                      const CMatrix& z, const CMatrix& x,
                                                      const Spectrum& poles) {
  if (smallest_relative_singular_value(x) < 1e-12) return std::nullopt;
  const auto n = a.rows();
  CVector diag(n);
  for (Eigen::Index i = 0; i < n; ++i) diag[i] = poles[static_cast<std::size_t>(i)];
  const CMatrix closed = x * diag.asDiagonal() * x.inverse();
  const CMatrix k_complex =
      z.triangularView<Eigen::Upper>().solve(u0.adjoint() * (a.cast<std::complex<double>>() - closed));
  const Eigen::MatrixXd k = k_complex.real();
  if (!k.allFinite()) return std::nullopt;
  if (k_complex.imag().cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, k.cwiseAbs().maxCoeff())) {
    return std::nullopt;
  }
  return k;
}

// Eigenvector selection that keeps X well conditioned: each column is
// repeatedly replaced by the projection onto its admissible subspace of the
// direction orthogonal to all other columns.
std::optional<Eigen::MatrixXd> place_robust(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                            const std::vector<Slot>& slots) {
  const auto n = a.rows();
  const auto m = b.cols();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(b);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
  if (Eigen::FullPivLU<Eigen::MatrixXd>(r).rank() < m) return std::nullopt;
  const CMatrix u0 = q.leftCols(m).cast<std::complex<double>>();
  const CMatrix u1 = q.rightCols(n - m).cast<std::complex<double>>();
  const CMatrix z = r.cast<std::complex<double>>();

  // admissible subspace for pole p: ker U1^H (A - p I), orthonormal basis
  std::vector<CMatrix> bases;
  for (const auto& s : slots) {
    if (n == m) {
      bases.push_back(CMatrix::Identity(n, n));
      continue;
    }
    const CMatrix shifted = a.cast<std::complex<double>>() - s.pole * CMatrix::Identity(n, n);
    Eigen::JacobiSVD<CMatrix> svd(u1.adjoint() * shifted, Eigen::ComputeFullV);
    bases.push_back(svd.matrixV().rightCols(m));
  }

  CMatrix x(n, n);
  std::vector<Eigen::Index> column_of(slots.size());
  {
    Eigen::Index col = 0;
    for (std::size_t s = 0; s < slots.size(); ++s) {
      column_of[s] = col;
      CVector v = bases[s] * parameter(static_cast<int>(s), static_cast<int>(bases[s].cols()), 0);
      v.normalize();
      x.col(col++) = v;
      if (slots[s].pair) x.col(col++) = v.conjugate();
    }
  }

  for (int sweep = 0; sweep < 100; ++sweep) {
    double change = 0.0;
    for (std::size_t s = 0; s < slots.size(); ++s) {
      const Eigen::Index col = column_of[s];
      CMatrix others(n, n - 1);
      others << x.leftCols(col), x.rightCols(n - col - 1);
      Eigen::HouseholderQR<CMatrix> oqr(others);
      const CMatrix oq = oqr.householderQ() * CMatrix::Identity(n, n);
      const CVector normal = oq.col(n - 1);
      CVector v = bases[s] * (bases[s].adjoint() * normal);
      const double norm = v.norm();
      if (!(norm > 1e-14)) continue;  // keep the previous column
      v /= norm;
      // fix the phase so the change measure is meaningful
      const std::complex<double> overlap = x.col(col).dot(v);
      if (std::abs(overlap) > 0.0) v *= std::conj(overlap) / std::abs(overlap);
      change = std::max(change, (v - x.col(col)).norm());
      x.col(col) = v;
      if (slots[s].pair) x.col(col + 1) = v.conjugate();
    }
    if (change < 1e-12) break;
  }
  return gain_from_eigenvectors(a, u0, z, x, expand(slots));
}

}  // namespace

Eigen::MatrixXd place(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Spectrum& poles) {
  const auto n = a.rows();
  const auto m = b.cols();
  if (a.cols() != n || b.rows() != n || m < 1) {
    throw ConfigError("place: inconsistent matrix dimensions");
  }
  if (static_cast<Eigen::Index>(poles.size()) != n) {
    throw ConfigError("place: expected " + std::to_string(n) + " poles, got " +
                      std::to_string(poles.size()));
  }
  const auto slots = group_conjugates(poles);
  if (!is_controllable(a, b)) throw NumericalError("place: pair is not controllable");

  double scale = 1.0;
  for (const auto& p : poles) scale = std::max(scale, std::abs(p));
  auto assigns = [&](const Eigen::MatrixXd& k) {
    return spectrum_distance(eigenvalues(a - b * k), poles) <= kPlacementTol * scale;
  };

  if (m <= n) {
    if (const auto k = place_robust(a, b, slots); k && assigns(*k)) return *k;
  }

  // fallback: parametric eigenvectors with deterministic perturbations
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    CMatrix x(n, n);
    CMatrix g(m, n);
    Eigen::Index col = 0;
    for (std::size_t s = 0; s < slots.size(); ++s) {
      const CVector v = eigen_column(a, b, slots[s].pole, parameter(static_cast<int>(s), static_cast<int>(m), attempt));
      x.col(col) = v.head(n);
      g.col(col) = v.tail(m);
      ++col;
      if (slots[s].pair) {
        x.col(col) = v.head(n).conjugate();
        g.col(col) = v.tail(m).conjugate();
        ++col;
      }
    }
    if (smallest_relative_singular_value(x) < 1e-12) continue;

    const CMatrix k_complex = g * x.inverse();
    const Eigen::MatrixXd k = k_complex.real();
    if (!k.allFinite()) continue;
    if (k_complex.imag().cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, k.cwiseAbs().maxCoeff())) continue;
    if (assigns(k)) return k;
  }
  throw NumericalError(
      "pole placement failed: requested spectrum cannot be assigned "
      "(repeated poles beyond the input count?)");
}

TrackingGain place_poles(const AugmentedModel& am, const Spectrum& poles) {
  TrackingGain gain;
  gain.K = place(am.Abar, am.Bbar, poles);
  return gain;
}

Mat5 closed_loop_matrix(const AugmentedModel& am, const TrackingGain& gain) {
  return am.Abar - am.Bbar * gain.K;
}

bool inside_unit_disk(const Spectrum& poles) {
  return std::all_of(poles.begin(), poles.end(), [](auto p) { return std::abs(p) < 1.0; });
}

Vec2 control(const TrackingGain& gain, const Vec3& x, const TrackingState& ts) {
  return -gain.K1() * x - gain.K2() * ts.z;
}

}  // namespace threetank::tracking
