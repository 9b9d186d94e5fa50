#pragma once

// Parameter records for the reduced single-cavity optomechanical model.
//
// Every frequency is expressed in units of the mechanical frequency omega_m
// (canonically 1). The only absolute-unit entry point is thermal_occupancy().

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <string_view>

#include "sqcool/error.hpp"

namespace sqcool {

using complex = std::complex<double>;

inline constexpr std::string_view units_tag = "omega_m";

/// Wraps a phase into [0, period).
inline double wrap_phase(double phase, double period) {
  double r = std::fmod(phase, period);
  if (r < 0.0) r += period;
  if (r >= period) r = 0.0;
  return r;
}

/// Squeezed-vacuum input noise seen by the cavity.
///
/// n_s = sinh^2(r_s) and m_s = cosh(r_s) sinh(r_s); the phase only enters
/// through exp(-2i phi_s) and is stored canonicalized to [0, pi).
struct SqueezedBath {
  double r_s = 0.0;
  double phi_s = 0.0;
  double n_s = 0.0;
  double m_s = 0.0;

  bool operator==(const SqueezedBath&) const = default;
};

inline SqueezedBath make_bath(double r_s, double phi_s) {
  if (!std::isfinite(r_s) || r_s < 0.0)
    fail(ErrorKind::invalid_parameter, "squeezing factor r_s must be finite and >= 0");
  if (!std::isfinite(phi_s)) fail(ErrorKind::invalid_parameter, "squeezing phase phi_s must be finite");
  const double sh = std::sinh(r_s);
  const double ch = std::cosh(r_s);
  return SqueezedBath{r_s, wrap_phase(phi_s, std::numbers::pi), sh * sh, ch * sh};
}

enum class Scheme { SB, ES, IS, ESIS };

inline constexpr std::array<Scheme, 4> all_schemes{Scheme::SB, Scheme::ES, Scheme::IS, Scheme::ESIS};

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::SB: return "SB";
    case Scheme::ES: return "ES";
    case Scheme::IS: return "IS";
    case Scheme::ESIS: return "ESIS";
  }
  return "?";
}

inline Scheme parse_scheme(std::string_view text) {
  for (Scheme s : all_schemes)
    if (text == to_string(s)) return s;
  fail(ErrorKind::invalid_parameter, "unknown scheme '" + std::string(text) + "' (expected SB, ES, IS or ESIS)");
}

inline bool uses_extracavity(Scheme s) { return s == Scheme::ES || s == Scheme::ESIS; }
inline bool uses_intracavity(Scheme s) { return s == Scheme::IS || s == Scheme::ESIS; }

struct ReducedParams {
  double delta = 1.0;       // effective detuning
  double kappa = 0.0;       // total cavity dissipation (intrinsic loss is zero)
  double omega_m = 1.0;
  double gamma = 1e-5;
  double g_coupling = 0.0;  // linearized coupling G, real by choice of drive phase
  double eps_mag = 0.0;     // |eps| of the intracavity parametric term
  double eps_phase = 0.0;   // arg(eps), radians
  SqueezedBath bath{};
  double n_th = 0.0;

  complex eps() const { return std::polar(eps_mag, eps_phase); }
  double q_m() const { return omega_m / gamma; }

  bool operator==(const ReducedParams&) const = default;
};

inline void validate(const ReducedParams& p) {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(p.omega_m) || p.omega_m <= 0.0) fail(ErrorKind::invalid_parameter, "omega_m must be > 0");
  if (!finite(p.kappa) || p.kappa < 0.0) fail(ErrorKind::invalid_parameter, "kappa must be >= 0");
  if (!finite(p.gamma) || p.gamma <= 0.0) fail(ErrorKind::invalid_parameter, "gamma must be > 0");
  if (!finite(p.n_th) || p.n_th < 0.0) fail(ErrorKind::invalid_parameter, "n_th must be >= 0");
  if (!finite(p.eps_mag) || p.eps_mag < 0.0) fail(ErrorKind::invalid_parameter, "eps_mag must be >= 0");
  if (!finite(p.g_coupling) || p.g_coupling < 0.0) fail(ErrorKind::invalid_parameter, "coupling G must be >= 0");
  if (!finite(p.delta) || !finite(p.eps_phase)) fail(ErrorKind::invalid_parameter, "delta and eps_phase must be finite");
  if (!finite(p.bath.r_s) || p.bath.r_s < 0.0) fail(ErrorKind::invalid_parameter, "bath r_s must be >= 0");
}

/// Zeroes the squeezing resources a scheme does not use. ESIS is the identity.
inline ReducedParams apply_scheme(ReducedParams p, Scheme scheme) {
  if (!uses_extracavity(scheme)) p.bath = make_bath(0.0, 0.0);
  if (!uses_intracavity(scheme)) {
    p.eps_mag = 0.0;
    p.eps_phase = 0.0;
  }
  return p;
}

/// Detuning sqrt(omega_m^2 + kappa^2/4) used for the scheme comparison.
inline double figure_detuning(double kappa, double omega_m = 1.0) {
  return std::sqrt(omega_m * omega_m + kappa * kappa / 4.0);
}

/// Parametric (OPO) threshold on |eps|: the cavity block is unstable once
/// 2|eps| exceeds sqrt(delta^2 + kappa^2/4).
inline double opo_threshold(double delta, double kappa) {
  return 0.5 * std::sqrt(delta * delta + kappa * kappa / 4.0);
}

inline double opo_threshold(const ReducedParams& p) { return opo_threshold(p.delta, p.kappa); }

/// Operating point of the four-scheme comparison: kappa = 4 omega_m * ratio,
/// figure detuning, Q_m and n_th as given, unit coupling and no squeezing.
inline ReducedParams comparison_point(double kappa_over_4wm, double q_m = 1e5, double n_th = 1e3) {
  ReducedParams p;
  p.omega_m = 1.0;
  p.kappa = 4.0 * kappa_over_4wm;
  p.delta = figure_detuning(p.kappa);
  p.gamma = 1.0 / q_m;
  p.n_th = n_th;
  p.g_coupling = 1.0;
  return p;
}

namespace constants {
inline constexpr double hbar = 1.054571817e-34;  // J s
inline constexpr double k_b = 1.380649e-23;      // J / K
}  // namespace constants

/// Bose occupation 1/(exp(hbar w / k_B T) - 1). Absolute units: kelvin, rad/s.
inline double thermal_occupancy(double temperature, double omega_m_abs) {
  if (!std::isfinite(temperature) || temperature < 0.0)
    fail(ErrorKind::invalid_parameter, "temperature must be >= 0");
  if (!std::isfinite(omega_m_abs) || omega_m_abs <= 0.0)
    fail(ErrorKind::invalid_parameter, "mechanical angular frequency must be > 0");
  if (temperature == 0.0) return 0.0;
  const double x = constants::hbar * omega_m_abs / (constants::k_b * temperature);
  return 1.0 / std::expm1(x);
}

/// Anti-Stokes (gamma_minus) and Stokes (gamma_plus) rates; gamma_opt is their
/// difference. When normalized, all three are divided by 4 G^2 / kappa.
struct RateSet {
  double gamma_minus = 0.0;
  double gamma_plus = 0.0;
  double gamma_opt = 0.0;
  bool normalized = false;
};

}  // namespace sqcool
