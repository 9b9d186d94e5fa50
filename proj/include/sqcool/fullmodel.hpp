#pragma once

// Two-optical-mode model (fundamental a_s, pump a_p, mechanics b) and its
// reduction to the single-cavity parameters after eliminating the pump.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "sqcool/error.hpp"
#include "sqcool/model.hpp"

namespace sqcool {

struct FullModelParams {
  double omega_m = 1.0;
  double gamma = 1e-5;
  double n_th = 0.0;
  double delta_s = 0.0;
  double delta_p = 0.0;
  double kappa_s = 1.0;
  double kappa_p = 1.0;
  double g_s = 0.0;
  double g_p = 0.0;
  complex eps0{};
  complex drive_s{};
  complex drive_p{};
  SqueezedBath bath{};  // shared by both optical modes
};

inline void validate(const FullModelParams& f) {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!(f.omega_m > 0.0) || !finite(f.omega_m)) fail(ErrorKind::invalid_parameter, "omega_m must be > 0");
  if (!(f.gamma > 0.0) || !finite(f.gamma)) fail(ErrorKind::invalid_parameter, "gamma must be > 0");
  if (!(f.n_th >= 0.0) || !finite(f.n_th)) fail(ErrorKind::invalid_parameter, "n_th must be >= 0");
  if (!(f.kappa_s > 0.0) || !(f.kappa_p > 0.0) || !finite(f.kappa_s) || !finite(f.kappa_p))
    fail(ErrorKind::invalid_parameter, "kappa_s and kappa_p must be > 0");
  for (double v : {f.delta_s, f.delta_p, f.g_s, f.g_p, f.eps0.real(), f.eps0.imag(), f.drive_s.real(),
                   f.drive_s.imag(), f.drive_p.real(), f.drive_p.imag()})
    if (!finite(v)) fail(ErrorKind::invalid_parameter, "full-model parameters must be finite");
}

struct Amplitudes {
  complex alpha_s{};
  complex alpha_p{};
  complex beta{};
};

/// Right-hand sides of the classical mean-field equations; zero at a steady state.
inline std::array<complex, 3> mean_field_rhs(const FullModelParams& f, const Amplitudes& a) {
  const complex i{0.0, 1.0};
  const double x = 2.0 * a.beta.real();  // beta + beta*
  return {
      complex{-f.kappa_s / 2.0, -f.delta_s} * a.alpha_s - 2.0 * i * std::conj(f.eps0) * std::conj(a.alpha_s) * a.alpha_p -
          i * f.g_s * a.alpha_s * x - f.drive_s,
      complex{-f.kappa_p / 2.0, -f.delta_p} * a.alpha_p - i * f.eps0 * a.alpha_s * a.alpha_s -
          i * f.g_p * a.alpha_p * x - f.drive_p,
      complex{-f.gamma / 2.0, -f.omega_m} * a.beta - i * f.g_s * std::norm(a.alpha_s) -
          i * f.g_p * std::norm(a.alpha_p),
  };
}

namespace detail {

inline double drive_scale(const FullModelParams& f) {
  const double s = std::max(std::abs(f.drive_s), std::abs(f.drive_p));
  return s > 0.0 ? s : 1.0;
}

inline double mean_field_residual(const FullModelParams& f, const Amplitudes& a) {
  double r = 0.0;
  for (const complex& c : mean_field_rhs(f, a)) r += std::norm(c);
  return std::sqrt(r) / drive_scale(f);
}

inline Eigen::Matrix<double, 6, 1> pack(const Amplitudes& a) {
  Eigen::Matrix<double, 6, 1> v;
  v << a.alpha_s.real(), a.alpha_s.imag(), a.alpha_p.real(), a.alpha_p.imag(), a.beta.real(), a.beta.imag();
  return v;
}

inline Amplitudes unpack(const Eigen::Matrix<double, 6, 1>& v) {
  return {complex{v(0), v(1)}, complex{v(2), v(3)}, complex{v(4), v(5)}};
}

// Real 6x6 Jacobian assembled from the Wirtinger derivatives d/dz and d/dz*.
inline Eigen::Matrix<double, 6, 6> mean_field_jacobian(const FullModelParams& f, const Amplitudes& a) {
  const complex i{0.0, 1.0};
  const complex s = a.alpha_s, p = a.alpha_p;
  const double x = 2.0 * a.beta.real();
  // dz[k][j], dzc[k][j]: derivative of equation k w.r.t. variable j and its conjugate
  complex dz[3][3] = {};
  complex dzc[3][3] = {};
  dz[0][0] = complex{-f.kappa_s / 2.0, -f.delta_s} - i * f.g_s * x;
  dzc[0][0] = -2.0 * i * std::conj(f.eps0) * p;
  dz[0][1] = -2.0 * i * std::conj(f.eps0) * std::conj(s);
  dz[0][2] = dzc[0][2] = -i * f.g_s * s;

  dz[1][0] = -2.0 * i * f.eps0 * s;
  dz[1][1] = complex{-f.kappa_p / 2.0, -f.delta_p} - i * f.g_p * x;
  dz[1][2] = dzc[1][2] = -i * f.g_p * p;

  dz[2][0] = -i * f.g_s * std::conj(s);
  dzc[2][0] = -i * f.g_s * s;
  dz[2][1] = -i * f.g_p * std::conj(p);
  dzc[2][1] = -i * f.g_p * p;
  dz[2][2] = complex{-f.gamma / 2.0, -f.omega_m};

  Eigen::Matrix<double, 6, 6> jac;
  for (int k = 0; k < 3; ++k)
    for (int j = 0; j < 3; ++j) {
      const complex dx = dz[k][j] + dzc[k][j];
      const complex dy = i * (dz[k][j] - dzc[k][j]);
      jac(2 * k, 2 * j) = dx.real();
      jac(2 * k + 1, 2 * j) = dx.imag();
      jac(2 * k, 2 * j + 1) = dy.real();
      jac(2 * k + 1, 2 * j + 1) = dy.imag();
    }
  return jac;
}

struct NewtonOutcome {
  Amplitudes root;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

inline NewtonOutcome damped_newton(const FullModelParams& f, Amplitudes guess, int max_iterations, double tol) {
  NewtonOutcome out;
  out.root = guess;
  out.residual = mean_field_residual(f, guess);
  for (int it = 0; it < max_iterations; ++it) {
    if (out.residual <= tol) {
      out.converged = true;
      return out;
    }
    out.iterations = it + 1;
    const auto rhs = mean_field_rhs(f, out.root);
    Eigen::Matrix<double, 6, 1> fv;
    fv << rhs[0].real(), rhs[0].imag(), rhs[1].real(), rhs[1].imag(), rhs[2].real(), rhs[2].imag();
    const Eigen::Matrix<double, 6, 1> step = mean_field_jacobian(f, out.root).fullPivLu().solve(-fv);
    if (!step.allFinite()) break;

    // step halving on residual increase
    double t = 1.0;
    bool accepted = false;
    for (int h = 0; h < 60; ++h, t *= 0.5) {
      const Amplitudes trial = unpack(pack(out.root) + t * step);
      const double r = mean_field_residual(f, trial);
      if (r < out.residual) {
        out.root = trial;
        out.residual = r;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  out.converged = out.residual <= tol;
  return out;
}

}  // namespace detail

struct ClassicalSteadyState {
  complex alpha_s{};
  complex alpha_p{};
  complex beta{};
  double residual = 0.0;
  double delta_s_eff = 0.0;
  double delta_p_eff = 0.0;
  int iterations = 0;
  bool bistable = false;  // a second guess converged to a different root
};

inline constexpr double classical_residual_tolerance = 1e-9;
inline constexpr int classical_max_iterations = 10000;

/// Uncoupled-cavity amplitudes, beta = 0; the default Newton starting point.
inline Amplitudes linear_cavity_guess(const FullModelParams& f) {
  return {-f.drive_s / complex{f.kappa_s / 2.0, f.delta_s}, -f.drive_p / complex{f.kappa_p / 2.0, f.delta_p}, {}};
}

inline ClassicalSteadyState classical_steady_state(const FullModelParams& full,
                                                   std::optional<Amplitudes> initial_guess = std::nullopt) {
  validate(full);
  const Amplitudes guess = initial_guess.value_or(linear_cavity_guess(full));
  const auto primary = detail::damped_newton(full, guess, classical_max_iterations, 1e-13);
  if (!(primary.residual <= classical_residual_tolerance))
    throw ConvergenceError("classical steady state did not converge", primary.residual);

  ClassicalSteadyState css;
  css.alpha_s = primary.root.alpha_s;
  css.alpha_p = primary.root.alpha_p;
  css.beta = primary.root.beta;
  css.residual = primary.residual;
  css.iterations = primary.iterations;
  const double x = 2.0 * css.beta.real();
  css.delta_s_eff = full.delta_s + full.g_s * x;
  css.delta_p_eff = full.delta_p + full.g_p * x;

  // Probe from the empty cavity and, when a guess was given, from the
  // linear-cavity solution for a second branch.
  std::vector<Amplitudes> probes{Amplitudes{}};
  if (initial_guess) probes.push_back(linear_cavity_guess(full));
  for (const Amplitudes& probe : probes) {
    const auto other = detail::damped_newton(full, probe, classical_max_iterations, 1e-13);
    if (!(other.residual <= classical_residual_tolerance)) continue;
    const double diff = std::max({std::abs(other.root.alpha_s - css.alpha_s),
                                  std::abs(other.root.alpha_p - css.alpha_p), std::abs(other.root.beta - css.beta)});
    css.bistable = css.bistable || diff > 1e-6;
  }
  return css;
}

/// Reduced parameters plus the phase theta = arg(g_s alpha_s) rotated out of G.
/// In the rotated frame a -> a e^{-i theta}: eps picks up e^{-2i theta} and the
/// squeezing phase phi_s shifts by theta.
struct ReducedModel {
  ReducedParams params;
  double frame_phase = 0.0;
};

inline ReducedModel extract_reduced(const FullModelParams& full, const ClassicalSteadyState& css) {
  validate(full);
  if (!(css.residual <= classical_residual_tolerance))
    fail(ErrorKind::invalid_parameter, "classical steady state residual is above tolerance");
  const complex g = full.g_s * css.alpha_s;
  const double theta = std::abs(g) > 0.0 ? std::arg(g) : 0.0;
  const complex eps = std::conj(full.eps0) * css.alpha_p * std::polar(1.0, -2.0 * theta);

  ReducedModel out;
  out.frame_phase = theta;
  ReducedParams& p = out.params;
  p.delta = css.delta_s_eff;
  p.kappa = full.kappa_s;
  p.omega_m = full.omega_m;
  p.gamma = full.gamma;
  p.n_th = full.n_th;
  p.g_coupling = std::abs(g);
  p.eps_mag = std::abs(eps);
  p.eps_phase = p.eps_mag > 0.0 ? wrap_phase(std::arg(eps), 2.0 * std::numbers::pi) : 0.0;
  p.bath = make_bath(full.bath.r_s, full.bath.phi_s + theta);
  return out;
}

/// Size of the pump-induced corrections and the adiabatic-elimination check
/// Delta_p^eff >> max[sqrt(g_p^2 |alpha_p|^2 kappa_p / omega_m), sqrt(kappa_p/kappa_s) |2 eps0 alpha_s|],
/// with ">>" taken as a factor of at least adiabatic_margin_required.
struct AdiabaticReport {
  double lhs = 0.0;
  std::array<double, 2> rhs_terms{};
  double margin = 0.0;
  bool valid = false;
  double detuning_shift_s = 0.0;
  double dissipation_shift_s = 0.0;
  double mech_detuning_shift = 0.0;
  double mech_squeezing = 0.0;  // magnitude of the induced b^dag coupling in the b equation
};

inline constexpr double adiabatic_margin_required = 10.0;

inline AdiabaticReport adiabatic_report(const FullModelParams& full, const ClassicalSteadyState& css) {
  const double dp = css.delta_p_eff;
  const double lor = dp * dp + full.kappa_p * full.kappa_p / 4.0;
  if (!(lor > 0.0)) fail(ErrorKind::degenerate_parameter, "pump mode has zero detuning and zero dissipation");
  validate(full);

  const double as2 = std::norm(css.alpha_s);
  const double ap2 = std::norm(css.alpha_p);
  const double e02 = std::norm(full.eps0);

  AdiabaticReport r;
  r.lhs = dp;
  r.rhs_terms = {std::sqrt(full.g_p * full.g_p * ap2 * full.kappa_p / full.omega_m),
                 std::sqrt(full.kappa_p / full.kappa_s) * 2.0 * std::abs(full.eps0 * css.alpha_s)};
  const double rhs = std::max(r.rhs_terms[0], r.rhs_terms[1]);
  if (rhs > 0.0)
    r.margin = dp / rhs;
  else
    r.margin = dp > 0.0 ? std::numeric_limits<double>::infinity() : (dp < 0.0 ? -std::numeric_limits<double>::infinity() : 0.0);
  r.valid = r.margin >= adiabatic_margin_required;

  r.detuning_shift_s = -4.0 * e02 * as2 * dp / lor;
  r.dissipation_shift_s = 4.0 * e02 * as2 * full.kappa_p / lor;
  r.mech_detuning_shift = -2.0 * full.g_p * full.g_p * ap2 * dp / lor;
  r.mech_squeezing = std::abs(r.mech_detuning_shift);
  return r;
}

}  // namespace sqcool
