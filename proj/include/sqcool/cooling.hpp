#pragma once

// Cooling limits and the scheme-wise parameter search.
//
// Two estimates of the final phonon number are available: the weak-coupling
// rate equation n_f = (gamma n_th + Gamma_+)/(gamma + Gamma_opt), and the exact
// Lyapunov steady state of the linearized model. The optimizer minimizes the
// exact value; on the Stokes-suppressed manifold the rate equation keeps
// decreasing with G and has no interior optimum.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <thread>
#include <vector>

#include "sqcool/error.hpp"
#include "sqcool/gaussian.hpp"
#include "sqcool/model.hpp"
#include "sqcool/response.hpp"
#include "sqcool/simplex.hpp"

namespace sqcool {

enum class LimitMethod { rate_equation, lyapunov };

inline std::string_view to_string(LimitMethod m) {
  return m == LimitMethod::rate_equation ? "rate_equation" : "lyapunov";
}

struct CoolingLimit {
  double n_f = 0.0;
  LimitMethod method = LimitMethod::rate_equation;
  RateSet rates;  // unnormalized
};

inline CoolingLimit rate_equation_limit(const ReducedParams& params, Scheme scheme) {
  validate(params);
  const RateSet r = rates(params, scheme, false);
  const double den = params.gamma + r.gamma_opt;
  if (!(den > 0.0)) fail(ErrorKind::heating_divergence, "gamma + Gamma_opt <= 0: optical heating outruns damping");
  return CoolingLimit{(params.gamma * params.n_th + r.gamma_plus) / den, LimitMethod::rate_equation, r};
}

inline CoolingLimit exact_limit(const ReducedParams& params, Scheme scheme) {
  validate(params);
  const ReducedParams p = apply_scheme(params, scheme);
  const GaussianSteadyState s = steady_state(p);
  return CoolingLimit{s.n_b, LimitMethod::lyapunov, rates(p, scheme, false)};
}

/// Analytic lower estimate 2 n_th / Q_m + sqrt(n_th / Q_m) of the
/// intracavity-squeezing cooling limit.
inline double min_phonon_floor(double q_m, double n_th) {
  if (!std::isfinite(q_m) || q_m <= 0.0) fail(ErrorKind::invalid_parameter, "Q_m must be > 0");
  if (!std::isfinite(n_th) || n_th < 0.0) fail(ErrorKind::invalid_parameter, "n_th must be >= 0");
  return (2.0 * n_th + std::sqrt(n_th * q_m)) / q_m;
}

enum class SearchMode { suppressed, free };
enum class Objective { phonons, rate };

inline std::string_view to_string(SearchMode m) { return m == SearchMode::suppressed ? "suppressed" : "free"; }
inline std::string_view to_string(Objective o) { return o == Objective::phonons ? "phonons" : "rate"; }

/// Bounds and budget of the multi-start search.
///
/// In suppressed mode the Stokes rate is cancelled by construction: ES and
/// ESIS take (r_s, phi_s) from solve_suppression, IS takes the cancelling eps.
/// In free mode every squeezing variable of the scheme is searched directly.
/// The |eps| pins only apply to schemes where eps is a search variable.
struct SearchSpec {
  SearchMode mode = SearchMode::suppressed;
  double g_min = 1e-3;
  double g_max = 1e2;
  double eps_max_fraction = 1.0 - 1e-4;  // of the OPO threshold
  double r_s_max = 4.0;
  std::optional<double> eps_pinned;
  std::optional<double> phi_eps_pinned;

  int starts_g = 6;
  int starts_eps = 4;
  int starts_phase = 4;
  int starts_r_s = 2;
  int min_starts = 20;
  int max_evaluations = 2000;  // per start
  double convergence_diameter = 1e-6;
  double tie_tolerance = 1e-2;  // relative n_f window for the small-G tie-break
  double jitter = 0.1;          // fraction of a grid cell
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

inline void validate(const SearchSpec& s) {
  auto bad = [](const char* what) { fail(ErrorKind::invalid_parameter, what); };
  if (!(s.g_min > 0.0) || !(s.g_max > s.g_min) || !std::isfinite(s.g_max)) bad("search needs 0 < g_min < g_max");
  if (!(s.eps_max_fraction > 0.0 && s.eps_max_fraction < 1.0)) bad("eps_max_fraction must lie in (0, 1)");
  if (!(s.r_s_max > 0.0) || !std::isfinite(s.r_s_max)) bad("r_s_max must be > 0");
  if (s.eps_pinned && !(*s.eps_pinned >= 0.0 && std::isfinite(*s.eps_pinned))) bad("pinned |eps| must be >= 0");
  if (s.phi_eps_pinned && !std::isfinite(*s.phi_eps_pinned)) bad("pinned eps phase must be finite");
  if (s.starts_g < 1 || s.starts_eps < 1 || s.starts_phase < 1 || s.starts_r_s < 1 || s.min_starts < 1)
    bad("start counts must be >= 1");
  if (s.max_evaluations < 1) bad("max_evaluations must be >= 1");
  if (!(s.tie_tolerance >= 0.0) || !(s.jitter >= 0.0 && s.jitter <= 1.0)) bad("tie_tolerance/jitter out of range");
  if (!(s.convergence_diameter > 0.0)) bad("convergence_diameter must be > 0");
}

struct OptimizationResult {
  Scheme scheme = Scheme::SB;
  Objective objective = Objective::phonons;
  double objective_value = 0.0;
  double n_f_min = 0.0;            // Lyapunov n_f at the reported point
  double n_f_rate_equation = 0.0;  // rate-equation n_f at the same point (NaN if divergent)
  double g_opt = 0.0;
  double eps_opt = 0.0;
  double phi_eps_opt = 0.0;
  double r_s_opt = 0.0;
  double phi_s_opt = 0.0;
  double gamma_minus_normalized = 0.0;
  double gamma_plus_normalized = 0.0;
  double gamma_opt_normalized = 0.0;
  double gamma_tot = 0.0;  // gamma_opt_normalized * g_opt^2
  double gamma_net = 0.0;  // unnormalized Gamma_- - Gamma_+ at the reported point
  bool stable = false;
  int starts = 0;
  int evaluations = 0;
  bool converged = false;
  ReducedParams params;
};

namespace detail {

enum class Var { log_g, eps_gap, phi_eps, r_s, phi_s };

struct SearchProblem {
  ReducedParams base;
  Scheme scheme;
  SearchSpec spec;
  Objective objective;
  std::vector<Var> vars;
  double eps_threshold = 0.0;
  double gap_lo = 0.0;  // log10(1 - eps_max_fraction)

  SearchProblem(const ReducedParams& b, Scheme s, const SearchSpec& sp, Objective o)
      : base(apply_scheme(b, s)), scheme(s), spec(sp), objective(o) {
    eps_threshold = opo_threshold(base);
    gap_lo = std::log10(1.0 - spec.eps_max_fraction);
    if (objective == Objective::phonons) vars.push_back(Var::log_g);
    const bool eps_free = uses_intracavity(scheme) && (scheme == Scheme::ESIS || spec.mode == SearchMode::free);
    if (eps_free) {
      if (!spec.eps_pinned) vars.push_back(Var::eps_gap);
      if (!spec.phi_eps_pinned) vars.push_back(Var::phi_eps);
    }
    if (uses_extracavity(scheme) && spec.mode == SearchMode::free) {
      vars.push_back(Var::r_s);
      vars.push_back(Var::phi_s);
    }
  }

  bool eps_free() const {
    return uses_intracavity(scheme) && (scheme == Scheme::ESIS || spec.mode == SearchMode::free);
  }

  std::optional<ReducedParams> decode(std::span<const double> u) const {
    ReducedParams p = base;
    p.g_coupling = spec.g_min;
    if (eps_free()) {
      if (spec.eps_pinned) p.eps_mag = *spec.eps_pinned;
      if (spec.phi_eps_pinned) p.eps_phase = wrap_phase(*spec.phi_eps_pinned, 2.0 * std::numbers::pi);
    }
    double r_s = 0.0;
    double phi_s = 0.0;
    for (std::size_t k = 0; k < vars.size(); ++k) {
      const double x = u[k];
      switch (vars[k]) {
        case Var::log_g:
          if (x < std::log10(spec.g_min) || x > std::log10(spec.g_max)) return std::nullopt;
          p.g_coupling = std::pow(10.0, x);
          break;
        case Var::eps_gap:
          if (x < gap_lo || x > 0.0) return std::nullopt;
          p.eps_mag = eps_threshold * (1.0 - std::pow(10.0, x));
          break;
        case Var::phi_eps:
          p.eps_phase = wrap_phase(std::numbers::pi * x, 2.0 * std::numbers::pi);
          break;
        case Var::r_s:
          if (x < 0.0 || x > 1.0) return std::nullopt;
          r_s = spec.r_s_max * x;
          break;
        case Var::phi_s:
          phi_s = std::numbers::pi * x;
          break;
      }
    }
    if (spec.mode == SearchMode::free) {
      if (uses_extracavity(scheme)) p.bath = make_bath(r_s, phi_s);
      return p;
    }
    try {
      if (scheme == Scheme::IS) return pin_to_suppressed_manifold(p, scheme);
      if (uses_extracavity(scheme)) {
        const SuppressionSolution sol = solve_suppression(p);
        if (!sol.feasible) return std::nullopt;
        p.bath = make_bath(sol.r_s, sol.phi_s);
      }
    } catch (const Error&) {
      return std::nullopt;
    }
    return p;
  }

  // Minimized quantity; +inf marks infeasible, unstable or rejected points.
  double value(const ReducedParams& p) const {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (objective == Objective::phonons) {
      GaussianSteadyState s;
      return try_steady_state(p, s) == SteadyStatus::ok ? s.n_b : inf;
    }
    if (!stability(p).stable) return inf;
    try {
      return -rates(p, Scheme::ESIS, true).gamma_opt;
    } catch (const Error&) {
      return inf;
    }
  }

  double operator()(std::span<const double> u) const {
    const auto p = decode(u);
    return p ? value(*p) : std::numeric_limits<double>::infinity();
  }

  struct Axis {
    double lo, hi;
    int count;
    bool periodic;
    double step;
  };

  Axis axis(Var v) const {
    switch (v) {
      case Var::log_g: return {std::log10(spec.g_min), std::log10(spec.g_max), spec.starts_g, false, 0.5};
      case Var::eps_gap: return {gap_lo, 0.0, spec.starts_eps, false, 0.5};
      case Var::phi_eps: return {0.0, 2.0, spec.starts_phase, true, 0.25};
      case Var::r_s: return {0.0, 1.0, spec.starts_r_s, false, 0.1};
      case Var::phi_s: return {0.0, 1.0, spec.starts_phase, true, 0.25};
    }
    return {0.0, 1.0, 1, false, 0.1};
  }

  // Grid of starting points with seeded jitter, in a fixed order.
  std::vector<std::vector<double>> starts() const {
    const std::size_t n = vars.size();
    if (n == 0) return {std::vector<double>{}};
    std::vector<Axis> axes;
    for (Var v : vars) axes.push_back(axis(v));
    int total = 1;
    for (const Axis& a : axes) total *= a.count;
    if (total < spec.min_starts) {
      const int others = total / axes[0].count;
      axes[0].count = (spec.min_starts + others - 1) / others;
      total = axes[0].count * others;
    }

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(-0.5, 0.5);
    std::vector<std::vector<double>> out;
    out.reserve(static_cast<std::size_t>(total));
    std::vector<int> idx(n, 0);
    for (int s = 0; s < total; ++s) {
      std::vector<double> x(n);
      for (std::size_t k = 0; k < n; ++k) {
        const Axis& a = axes[k];
        const double cell = (a.hi - a.lo) / a.count;
        const double base = a.periodic ? a.lo + idx[k] * cell : a.lo + (idx[k] + 0.5) * cell;
        x[k] = base + spec.jitter * cell * unit(rng);
      }
      out.push_back(std::move(x));
      for (std::size_t k = n; k-- > 0;) {
        if (++idx[k] < axes[k].count) break;
        idx[k] = 0;
      }
    }
    return out;
  }

  std::vector<double> steps() const {
    std::vector<double> st;
    for (Var v : vars) st.push_back(axis(v).step);
    return st;
  }
};

inline OptimizationResult run_search(const ReducedParams& base, Scheme scheme, const SearchSpec& spec,
                                     Objective objective) {
  validate(base);
  validate(spec);
  const SearchProblem problem(base, scheme, spec, objective);
  const auto starts = problem.starts();
  const auto steps = problem.steps();

  NelderMeadOptions nm;
  nm.max_evaluations = spec.max_evaluations;
  nm.diameter_tolerance = spec.convergence_diameter;

  std::vector<NelderMeadResult> local(starts.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < starts.size(); i = next++)
      local[i] = nelder_mead([&](const std::vector<double>& u) { return problem(u); }, starts[i], steps, nm);
  };
  const unsigned nthreads = std::max(1u, std::min<unsigned>(spec.workers, static_cast<unsigned>(starts.size())));
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  }

  int evaluations = 0;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : local) {
    evaluations += r.evaluations;
    if (std::isfinite(r.value)) best = std::min(best, r.value);
  }
  if (!std::isfinite(best))
    fail(ErrorKind::empty_feasible_set, "no stable, feasible point found in the search space for scheme " +
                                            std::string(to_string(scheme)));

  // smaller G, then smaller |eps|, among optima within the tie window
  const double window = objective == Objective::phonons ? spec.tie_tolerance * std::abs(best) : 0.0;
  std::size_t chosen = starts.size();
  ReducedParams chosen_params;
  for (std::size_t i = 0; i < local.size(); ++i) {
    if (!std::isfinite(local[i].value) || local[i].value > best + window) continue;
    const ReducedParams p = *problem.decode(local[i].x);
    if (chosen == starts.size() || p.g_coupling < chosen_params.g_coupling ||
        (p.g_coupling == chosen_params.g_coupling && p.eps_mag < chosen_params.eps_mag)) {
      chosen = i;
      chosen_params = p;
    }
  }

  OptimizationResult out;
  out.scheme = scheme;
  out.objective = objective;
  out.objective_value = local[chosen].value;
  out.params = chosen_params;
  out.g_opt = chosen_params.g_coupling;
  out.eps_opt = chosen_params.eps_mag;
  out.phi_eps_opt = chosen_params.eps_phase;
  out.r_s_opt = chosen_params.bath.r_s;
  out.phi_s_opt = chosen_params.bath.phi_s;
  out.starts = static_cast<int>(starts.size());
  out.evaluations = evaluations;
  out.converged = local[chosen].converged;
  out.stable = stability(chosen_params).stable;

  const RateSet rn = rates(chosen_params, Scheme::ESIS, true);
  out.gamma_minus_normalized = rn.gamma_minus;
  out.gamma_plus_normalized = rn.gamma_plus;
  out.gamma_opt_normalized = rn.gamma_opt;
  const double g2 = out.g_opt * out.g_opt;
  out.gamma_net = rn.gamma_opt * 4.0 * g2 / chosen_params.kappa;

  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (objective == Objective::phonons) {
    out.n_f_min = out.objective_value;
    out.gamma_tot = rn.gamma_opt * g2;
    try {
      out.n_f_rate_equation = rate_equation_limit(chosen_params, Scheme::ESIS).n_f;
    } catch (const Error&) {
      out.n_f_rate_equation = nan;
    }
  } else {
    out.n_f_min = nan;
    out.n_f_rate_equation = nan;
    out.gamma_tot = nan;
  }
  return out;
}

}  // namespace detail

/// Minimum Lyapunov phonon number over the scheme's free variables and G.
inline OptimizationResult minimize_phonons(const ReducedParams& base, Scheme scheme, const SearchSpec& spec) {
  return detail::run_search(base, scheme, spec, Objective::phonons);
}

/// Largest normalized net rate (Gamma_- - Gamma_+)/(4G^2/kappa), which does not
/// depend on G; stability is checked at G = g_min.
inline OptimizationResult maximize_rate(const ReducedParams& base, Scheme scheme, const SearchSpec& spec) {
  return detail::run_search(base, scheme, spec, Objective::rate);
}

}  // namespace sqcool
