#pragma once

// Exact linear dynamics of the reduced model in quadrature form.
//
// State ordering (X_a, Y_a, X_b, Y_b) with X = (o + o^dag)/sqrt(2),
// Y = (o - o^dag)/(i sqrt(2)); vacuum has covariance I/2. The steady state
// solves A V + V A^T + D = 0 for the symmetrized covariance V.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include "sqcool/error.hpp"
#include "sqcool/model.hpp"

namespace sqcool {

using Mat4 = Eigen::Matrix4d;

/// Drift eigenvalues must have real part below -stability_margin * omega_m.
inline constexpr double stability_margin = 1e-9;
inline constexpr double lyapunov_residual_tolerance = 1e-9;
inline constexpr double physicality_tolerance = 1e-8;

struct DriftMatrix {
  Mat4 a = Mat4::Zero();
};

struct DiffusionMatrix {
  Mat4 d = Mat4::Zero();
};

inline DriftMatrix build_drift(const ReducedParams& p) {
  const double er = p.eps_mag * std::cos(p.eps_phase);
  const double ei = p.eps_mag * std::sin(p.eps_phase);
  const double g = p.g_coupling;
  DriftMatrix m;
  Mat4& a = m.a;
  // cavity: parametric term -2i eps a^dag mixes the quadratures
  a(0, 0) = -p.kappa / 2.0 + 2.0 * ei;
  a(0, 1) = p.delta - 2.0 * er;
  a(1, 0) = -p.delta - 2.0 * er;
  a(1, 1) = -p.kappa / 2.0 - 2.0 * ei;
  a(1, 2) = -2.0 * g;
  // mechanics
  a(2, 2) = -p.gamma / 2.0;
  a(2, 3) = p.omega_m;
  a(3, 2) = -p.omega_m;
  a(3, 3) = -p.gamma / 2.0;
  a(3, 0) = -2.0 * g;
  return m;
}

/// Symmetrized white-noise correlators: squeezed vacuum into the cavity,
/// thermal bath on the mechanics.
inline DiffusionMatrix build_diffusion(const ReducedParams& p) {
  const SqueezedBath& b = p.bath;
  const double c2 = std::cos(2.0 * b.phi_s);
  const double s2 = std::sin(2.0 * b.phi_s);
  DiffusionMatrix m;
  Mat4& d = m.d;
  d(0, 0) = p.kappa * (b.n_s + 0.5 + b.m_s * c2);
  d(1, 1) = p.kappa * (b.n_s + 0.5 - b.m_s * c2);
  d(0, 1) = d(1, 0) = -p.kappa * b.m_s * s2;
  d(2, 2) = d(3, 3) = p.gamma * (p.n_th + 0.5);
  return m;
}

struct StabilityVerdict {
  bool stable = false;
  double max_real_eig = 0.0;
};

inline StabilityVerdict stability(const DriftMatrix& drift, double omega_m) {
  const Eigen::EigenSolver<Mat4> es(drift.a, false);
  const double mx = es.eigenvalues().real().maxCoeff();
  return StabilityVerdict{mx < -stability_margin * omega_m, mx};
}

inline StabilityVerdict stability(const ReducedParams& p) { return stability(build_drift(p), p.omega_m); }

/// Solves A X + X A^T + Q = 0 through the 16x16 Kronecker system, with one
/// step of iterative refinement. The result is symmetrized.
inline Mat4 solve_lyapunov(const Mat4& a, const Mat4& q) {
  using Mat16 = Eigen::Matrix<double, 16, 16>;
  using Vec16 = Eigen::Matrix<double, 16, 1>;
  const Mat4 id = Mat4::Identity();
  Mat16 op;
  // column-major vec(A X + X A^T) = (I (x) A + A (x) I) vec(X)
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) op.block<4, 4>(4 * i, 4 * j) = id(i, j) * a + a(i, j) * id;

  const Eigen::PartialPivLU<Mat16> lu(op);
  Vec16 rhs = -Eigen::Map<const Vec16>(q.data());
  Vec16 x = lu.solve(rhs);
  const Vec16 r = rhs - op * x;
  x += lu.solve(r);

  const Mat4 v = Eigen::Map<const Mat4>(x.data());
  return 0.5 * (v + v.transpose());
}

inline double lyapunov_residual(const Mat4& a, const Mat4& v, const Mat4& d) {
  const double dn = d.norm();
  const double rn = (a * v + v * a.transpose() + d).norm();
  return dn > 0.0 ? rn / dn : rn;
}

/// Smallest eigenvalue of V + (i/2) Omega; nonnegative for physical states.
inline double uncertainty_min_eigenvalue(const Mat4& v) {
  using CMat4 = Eigen::Matrix4cd;
  CMat4 m = v.cast<std::complex<double>>();
  const std::complex<double> half_i{0.0, 0.5};
  for (int k = 0; k < 4; k += 2) {
    m(k, k + 1) += half_i;
    m(k + 1, k) -= half_i;
  }
  const Eigen::SelfAdjointEigenSolver<CMat4> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

struct GaussianSteadyState {
  Mat4 covariance = Mat4::Zero();
  bool stable = false;
  double max_real_eig = 0.0;
  double n_b = 0.0;  // phonon occupancy
  double n_a = 0.0;  // intracavity photon occupancy (fluctuations)
  double residual = 0.0;
  double min_uncertainty_eig = 0.0;
};

enum class SteadyStatus { ok, unstable, numerical_failure };

/// Non-throwing core used by the optimizer's inner loop.
inline SteadyStatus try_steady_state(const ReducedParams& p, GaussianSteadyState& out) {
  const DriftMatrix drift = build_drift(p);
  const StabilityVerdict sv = stability(drift, p.omega_m);
  out.stable = sv.stable;
  out.max_real_eig = sv.max_real_eig;
  if (!sv.stable) return SteadyStatus::unstable;

  const DiffusionMatrix diff = build_diffusion(p);
  out.covariance = solve_lyapunov(drift.a, diff.d);
  out.residual = lyapunov_residual(drift.a, out.covariance, diff.d);
  const Mat4& v = out.covariance;
  out.n_a = (v(0, 0) + v(1, 1) - 1.0) / 2.0;
  out.n_b = (v(2, 2) + v(3, 3) - 1.0) / 2.0;
  out.min_uncertainty_eig = uncertainty_min_eigenvalue(v);

  const bool ok = out.covariance.allFinite() && out.residual <= lyapunov_residual_tolerance &&
                  out.min_uncertainty_eig >= -physicality_tolerance && out.n_a >= -physicality_tolerance &&
                  out.n_b >= -physicality_tolerance;
  return ok ? SteadyStatus::ok : SteadyStatus::numerical_failure;
}

inline GaussianSteadyState steady_state(const ReducedParams& p) {
  GaussianSteadyState s;
  switch (try_steady_state(p, s)) {
    case SteadyStatus::ok:
      return s;
    case SteadyStatus::unstable:
      throw InstabilityError("drift matrix is unstable (max Re lambda = " + std::to_string(s.max_real_eig) + ")",
                             s.max_real_eig);
    case SteadyStatus::numerical_failure:
      break;
  }
  fail(ErrorKind::numerical_failure, "Lyapunov steady state rejected (residual " + std::to_string(s.residual) +
                                         ", min uncertainty eigenvalue " + std::to_string(s.min_uncertainty_eig) +
                                         ")");
}

}  // namespace sqcool
