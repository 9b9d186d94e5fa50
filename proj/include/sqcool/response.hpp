#pragma once

// Frequency-domain response of the cavity: susceptibility, radiation-pressure
// force spectrum, Stokes/anti-Stokes rates and the Stokes-suppression condition.
//
// Convention: O(w) = \int dt e^{i w t} O(t), chi(w) = 1 / (-i (w - delta) + kappa/2).
// The anti-Stokes (cooling) rate is S_FF(+omega_m), the Stokes rate S_FF(-omega_m).

#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include "sqcool/error.hpp"
#include "sqcool/model.hpp"

namespace sqcool {

/// Below this, |1 - 4|eps|^2 chi(w) chi*(-w)|^2 is treated as the parametric pole.
inline constexpr double parametric_denominator_floor = 1e-30;

inline complex chi(double omega, const ReducedParams& p) {
  const complex den{p.kappa / 2.0, -(omega - p.delta)};
  if (den == complex{0.0, 0.0})
    fail(ErrorKind::singularity, "cavity susceptibility is singular (kappa = 0 and omega = delta)");
  return 1.0 / den;
}

struct SpectrumPoint {
  double omega = 0.0;
  double s_ff = 0.0;
};

namespace detail {

// S_FF(w) of the joint-squeezing model evaluated for the parameters as given.
inline double force_spectrum(double omega, const ReducedParams& p) {
  const complex i{0.0, 1.0};
  const complex eps = p.eps();
  const complex chi_w = chi(omega, p);
  const complex chi_mw = chi(-omega, p);
  const double eps2 = p.eps_mag * p.eps_mag;

  const double den = std::norm(1.0 - 4.0 * eps2 * chi_w * std::conj(chi_mw));
  if (!(den >= parametric_denominator_floor))
    fail(ErrorKind::singularity, "force spectrum prefactor is singular (parametric threshold)");
  const double s0 = p.g_coupling * p.g_coupling * p.kappa / den;

  const double sh = std::sinh(p.bath.r_s);
  const double ch = std::cosh(p.bath.r_s);
  const complex phase = std::polar(1.0, -2.0 * p.bath.phi_s);
  const complex term = (1.0 + 2.0 * i * std::conj(eps) * std::conj(chi_w)) * chi_mw * sh * phase +
                       (1.0 - 2.0 * i * eps * chi_mw) * std::conj(chi_w) * ch;
  return s0 * std::norm(term);
}

}  // namespace detail

/// Radiation-pressure force spectrum for a scheme. The general joint-squeezing
/// expression is always evaluated, after the scheme's unused resources are zeroed.
inline SpectrumPoint spectrum(double omega, const ReducedParams& params, Scheme scheme) {
  return SpectrumPoint{omega, detail::force_spectrum(omega, apply_scheme(params, scheme))};
}

/// Rates at +-omega_m. Normalized rates are per 4 G^2 / kappa, so they are
/// defined (and G independent) even at G = 0.
inline RateSet rates(const ReducedParams& params, Scheme scheme, bool normalized) {
  ReducedParams p = apply_scheme(params, scheme);
  double scale = 1.0;
  if (normalized) {
    if (!(p.kappa > 0.0)) fail(ErrorKind::invalid_parameter, "normalized rates need kappa > 0");
    p.g_coupling = 1.0;
    scale = p.kappa / 4.0;
  }
  RateSet r;
  r.gamma_minus = scale * detail::force_spectrum(p.omega_m, p);
  r.gamma_plus = scale * detail::force_spectrum(-p.omega_m, p);
  r.gamma_opt = r.gamma_minus - r.gamma_plus;
  r.normalized = normalized;
  return r;
}

/// Extracavity squeezing that cancels the Stokes rate for the given eps.
struct SuppressionSolution {
  double r_s = 0.0;
  double phi_s = 0.0;
  bool feasible = false;
  double rhs_modulus = 0.0;
  complex rhs{};  // tanh(r_s) exp(-2i phi_s) required by the cancellation

  SqueezedBath bath() const {
    if (!feasible) fail(ErrorKind::infeasible_suppression, "Stokes suppression is infeasible (|rhs| >= 1)");
    return make_bath(r_s, phi_s);
  }
};

inline SuppressionSolution solve_suppression(const ReducedParams& p) {
  const complex i{0.0, 1.0};
  const complex eps = p.eps();
  const complex chi_p = chi(p.omega_m, p);
  const complex chi_m = chi(-p.omega_m, p);

  const complex num = -std::conj(chi_m) * (1.0 - 2.0 * i * eps * chi_p);
  const complex den = chi_p * (1.0 + 2.0 * i * std::conj(eps) * std::conj(chi_m));
  if (!(std::abs(den) > 1e-14 * std::abs(chi_p)))
    fail(ErrorKind::degenerate_parameter, "Stokes-suppression condition has a vanishing denominator");

  SuppressionSolution s;
  s.rhs = num / den;
  s.rhs_modulus = std::abs(s.rhs);
  s.feasible = s.rhs_modulus < 1.0;
  if (s.feasible) {
    s.r_s = std::atanh(s.rhs_modulus);
    s.phi_s = wrap_phase(-std::arg(s.rhs) / 2.0, std::numbers::pi);
  }
  return s;
}

/// Intracavity squeezing alone cancels the Stokes rate when 1 - 2i eps chi(omega_m) = 0.
inline complex intracavity_suppression_eps(const ReducedParams& p) {
  return 1.0 / (complex{0.0, 2.0} * chi(p.omega_m, p));
}

/// Moves the parameters onto the scheme's Stokes-suppressed manifold:
/// ES and ESIS get the matching squeezed bath, IS gets the cancelling eps,
/// SB is only reduced. Throws infeasible_suppression when no bath exists.
inline ReducedParams pin_to_suppressed_manifold(const ReducedParams& params, Scheme scheme) {
  ReducedParams p = apply_scheme(params, scheme);
  switch (scheme) {
    case Scheme::SB:
      break;
    case Scheme::IS: {
      const complex eps = intracavity_suppression_eps(p);
      p.eps_mag = std::abs(eps);
      p.eps_phase = wrap_phase(std::arg(eps), 2.0 * std::numbers::pi);
      break;
    }
    case Scheme::ES:
    case Scheme::ESIS:
      p.bath = solve_suppression(p).bath();
      break;
  }
  return p;
}

struct ScanPoint {
  SpectrumPoint point;
  std::string error;  // empty when the point evaluated cleanly

  bool ok() const { return error.empty(); }
};

/// Pointwise spectrum over a grid; failing points are marked, not fatal.
inline std::vector<ScanPoint> scan_spectrum(const ReducedParams& params, Scheme scheme,
                                            std::span<const double> omega_grid) {
  if (omega_grid.empty()) fail(ErrorKind::invalid_parameter, "frequency grid is empty");
  std::vector<ScanPoint> out;
  out.reserve(omega_grid.size());
  for (double w : omega_grid) {
    ScanPoint sp;
    sp.point.omega = w;
    if (!std::isfinite(w)) {
      sp.point.s_ff = std::nan("");
      sp.error = "non-finite frequency";
    } else {
      try {
        sp.point = spectrum(w, params, scheme);
      } catch (const Error& e) {
        sp.point.s_ff = std::nan("");
        sp.error = std::string(to_string(e.kind()));
      }
    }
    out.push_back(std::move(sp));
  }
  return out;
}

}  // namespace sqcool
