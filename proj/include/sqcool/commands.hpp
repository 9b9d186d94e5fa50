#pragma once

// Subcommands of the sqcool tool. Each takes a built RunConfig, writes its
// artifact to the given stream and returns the process exit code.

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "sqcool/config.hpp"
#include "sqcool/cooling.hpp"
#include "sqcool/error.hpp"
#include "sqcool/fullmodel.hpp"
#include "sqcool/gaussian.hpp"
#include "sqcool/model.hpp"
#include "sqcool/response.hpp"

namespace sqcool::cli {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int config = 2;
inline constexpr int infeasible = 3;
inline constexpr int unstable = 4;
inline constexpr int numerical = 5;
}  // namespace exit_code

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_parameter: return exit_code::config;
    case ErrorKind::infeasible_suppression: return exit_code::infeasible;
    case ErrorKind::instability:
    case ErrorKind::heating_divergence:
    case ErrorKind::empty_feasible_set: return exit_code::unstable;
    case ErrorKind::singularity:
    case ErrorKind::degenerate_parameter:
    case ErrorKind::numerical_failure:
    case ErrorKind::convergence: return exit_code::numerical;
  }
  return exit_code::numerical;
}

struct CommandOptions {
  unsigned workers = 1;
  std::ostream* log = nullptr;  // progress and diagnostics; null when quiet
};

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"spectrum", "rates",    "suppress",          "steady",
                                              "optimize", "sweep",    "validate-adiabatic"};
  return names;
}

inline std::string default_format(std::string_view command) {
  return command == "spectrum" || command == "sweep" ? "csv" : "json";
}

// ---- JSON records -----------------------------------------------------------

using nlohmann::json;

inline json to_json(const SqueezedBath& b) {
  return {{"r_s", b.r_s}, {"phi_s", b.phi_s}, {"n_s", b.n_s}, {"m_s", b.m_s}};
}

inline json to_json(const ReducedParams& p) {
  return {{"units", units_tag},     {"delta", p.delta},     {"kappa", p.kappa},         {"omega_m", p.omega_m},
          {"gamma", p.gamma},       {"q_m", p.q_m()},       {"g", p.g_coupling},        {"eps_mag", p.eps_mag},
          {"eps_phase", p.eps_phase}, {"bath", to_json(p.bath)}, {"n_th", p.n_th}};
}

inline json to_json(const RateSet& r) {
  return {{"gamma_minus", r.gamma_minus},
          {"gamma_plus", r.gamma_plus},
          {"gamma_opt", r.gamma_opt},
          {"normalized", r.normalized}};
}

inline json complex_json(complex z) { return {{"re", z.real()}, {"im", z.imag()}}; }

inline json to_json(const OptimizationResult& r) {
  return {{"scheme", to_string(r.scheme)},
          {"objective", to_string(r.objective)},
          {"objective_value", r.objective_value},
          {"n_f_min", r.n_f_min},
          {"n_f_rate_equation", r.n_f_rate_equation},
          {"g_opt", r.g_opt},
          {"eps_opt", r.eps_opt},
          {"phi_eps_opt", r.phi_eps_opt},
          {"r_s_opt", r.r_s_opt},
          {"phi_s_opt", r.phi_s_opt},
          {"gamma_minus_normalized", r.gamma_minus_normalized},
          {"gamma_plus_normalized", r.gamma_plus_normalized},
          {"gamma_opt_normalized", r.gamma_opt_normalized},
          {"gamma_tot", r.gamma_tot},
          {"gamma_net", r.gamma_net},
          {"stable", r.stable},
          {"starts", r.starts},
          {"evaluations", r.evaluations},
          {"converged", r.converged},
          {"params", to_json(r.params)}};
}

inline json document(const RunConfig& rc, std::string_view command, json result) {
  return {{"provenance",
           {{"tool", "sqcool"},
            {"version", version},
            {"command", command},
            {"config_hash", config_hash(rc.tree)},
            {"seed", rc.seed},
            {"units", units_tag}}},
          {"config", to_json(rc.tree)},
          {"result", std::move(result)}};
}

inline void write_json(std::ostream& out, const json& doc) { out << doc.dump(2) << '\n'; }

inline std::string csv_preamble(const RunConfig& rc) {
  return "# units=" + std::string(units_tag) + " version=" + std::string(version) +
         " normalized=" + (rc.normalized ? "true" : "false") + " config_hash=" + config_hash(rc.tree) + "\n";
}

// ---- helpers ---------------------------------------------------------------

inline void require_kappa(const ReducedParams& p) {
  if (std::isnan(p.kappa)) throw ConfigError("this command needs reduced.kappa or reduced.kappa_over_4wm");
}

/// Scheme parameters for a task: the scheme's resources, optionally moved
/// onto its Stokes-suppressed manifold.
inline ReducedParams scheme_params(const RunConfig& rc, Scheme scheme) {
  require_kappa(rc.params);
  validate(rc.params);
  return rc.suppressed_manifold ? pin_to_suppressed_manifold(rc.params, scheme) : apply_scheme(rc.params, scheme);
}

inline void require_format(const std::string& format, std::string_view command) {
  if (format != "json" && (format != "csv" || default_format(command) != "csv"))
    throw ConfigError("format '" + format + "' is not available for " + std::string(command));
}

// ---- commands ----------------------------------------------------------------

inline int cmd_spectrum(const RunConfig& rc, const std::string& format, std::ostream& out) {
  require_format(format, "spectrum");
  if (!rc.grid) throw ConfigError("spectrum needs a [grid] section");
  require_kappa(rc.params);
  validate(rc.params);

  struct Prepared {
    Scheme scheme;
    std::optional<ReducedParams> params;
    std::string error;
  };
  std::vector<Prepared> prepared;
  int code = exit_code::ok;
  for (Scheme s : rc.schemes) {
    Prepared pr{s, std::nullopt, {}};
    try {
      pr.params = scheme_params(rc, s);
    } catch (const Error& e) {
      pr.error = std::string(to_string(e.kind()));
      code = std::max(code, exit_code_for(e.kind()));
    }
    prepared.push_back(std::move(pr));
  }

  json rows = json::array();
  std::string csv = csv_preamble(rc) + "omega_over_omega_m,scheme,s_ff_normalized,error\n";
  std::map<Scheme, std::vector<ScanPoint>> scans;
  for (const Prepared& pr : prepared) {
    if (!pr.params) continue;
    ReducedParams p = *pr.params;
    if (rc.normalized) {
      if (!(p.kappa > 0.0)) throw ConfigError("normalized spectra need kappa > 0");
      p.g_coupling = std::sqrt(p.kappa / 4.0);  // 4 G^2 / kappa = 1
    }
    scans[pr.scheme] = scan_spectrum(p, pr.scheme, rc.grid->omegas);
  }
  for (std::size_t i = 0; i < rc.grid->omegas.size(); ++i) {
    const double w = rc.grid->omegas[i];
    for (const Prepared& pr : prepared) {
      double s = std::numeric_limits<double>::quiet_NaN();
      std::string err = pr.error;
      if (pr.params) {
        const ScanPoint& sp = scans.at(pr.scheme)[i];
        s = sp.point.s_ff;
        err = sp.error;
      }
      csv += format_double(w) + "," + std::string(to_string(pr.scheme)) + "," + format_double(s) + "," + err + "\n";
      rows.push_back({{"omega_over_omega_m", w},
                      {"scheme", to_string(pr.scheme)},
                      {"s_ff_normalized", s},
                      {"error", err}});
    }
  }
  if (format == "csv")
    out << csv;
  else
    write_json(out, document(rc, "spectrum", {{"normalized", rc.normalized}, {"rows", rows}}));
  return code;
}

inline int cmd_rates(const RunConfig& rc, const std::string& format, std::ostream& out) {
  require_format(format, "rates");
  json list = json::array();
  for (Scheme s : rc.schemes) {
    const ReducedParams p = scheme_params(rc, s);
    list.push_back({{"scheme", to_string(s)}, {"params", to_json(p)}, {"rates", to_json(rates(p, s, rc.normalized))}});
  }
  write_json(out, document(rc, "rates", {{"schemes", list}}));
  return exit_code::ok;
}

inline int cmd_suppress(const RunConfig& rc, const std::string& format, std::ostream& out) {
  require_format(format, "suppress");
  require_kappa(rc.params);
  validate(rc.params);
  int code = exit_code::ok;
  json list = json::array();
  for (Scheme s : rc.schemes) {
    const ReducedParams p = apply_scheme(rc.params, s);
    json entry{{"scheme", to_string(s)}};
    if (uses_extracavity(s)) {
      const SuppressionSolution sol = solve_suppression(p);
      entry["resource"] = "extracavity";
      entry["feasible"] = sol.feasible;
      entry["rhs_modulus"] = sol.rhs_modulus;
      entry["rhs"] = complex_json(sol.rhs);
      entry["r_s"] = sol.r_s;
      entry["phi_s"] = sol.phi_s;
      entry["eps_mag"] = p.eps_mag;
      entry["eps_phase"] = p.eps_phase;
      if (!sol.feasible) code = exit_code::infeasible;
    } else if (uses_intracavity(s)) {
      const complex eps = intracavity_suppression_eps(p);
      entry["resource"] = "intracavity";
      entry["feasible"] = std::abs(eps) < opo_threshold(p);
      entry["eps_mag"] = std::abs(eps);
      entry["eps_phase"] = wrap_phase(std::arg(eps), 2.0 * std::numbers::pi);
      entry["opo_threshold"] = opo_threshold(p);
    } else {
      entry["resource"] = "none";
      entry["feasible"] = false;
    }
    list.push_back(entry);
  }
  write_json(out, document(rc, "suppress", {{"schemes", list}}));
  return code;
}

inline int cmd_steady(const RunConfig& rc, const std::string& format, std::ostream& out) {
  require_format(format, "steady");
  json list = json::array();
  for (Scheme s : rc.schemes) {
    const ReducedParams p = scheme_params(rc, s);
    const GaussianSteadyState st = steady_state(p);
    json cov = json::array();
    for (int i = 0; i < 4; ++i) {
      json row = json::array();
      for (int j = 0; j < 4; ++j) row.push_back(st.covariance(i, j));
      cov.push_back(row);
    }
    double n_rate = std::numeric_limits<double>::quiet_NaN();
    try {
      n_rate = rate_equation_limit(p, s).n_f;
    } catch (const Error&) {
    }
    list.push_back({{"scheme", to_string(s)},
                    {"params", to_json(p)},
                    {"n_b", st.n_b},
                    {"n_a", st.n_a},
                    {"n_f_rate_equation", n_rate},
                    {"stable", st.stable},
                    {"max_real_eig", st.max_real_eig},
                    {"lyapunov_residual", st.residual},
                    {"min_uncertainty_eig", st.min_uncertainty_eig},
                    {"covariance", cov}});
  }
  write_json(out, document(rc, "steady", {{"schemes", list}}));
  return exit_code::ok;
}

inline int cmd_optimize(const RunConfig& rc, const std::string& format, std::ostream& out,
                        const CommandOptions& opt) {
  require_format(format, "optimize");
  require_kappa(rc.params);
  SearchSpec spec = rc.search;
  spec.workers = std::max(1u, opt.workers);
  json list = json::array();
  for (Scheme s : rc.schemes) {
    const OptimizationResult r = rc.objective == Objective::phonons ? minimize_phonons(rc.params, s, spec)
                                                                    : maximize_rate(rc.params, s, spec);
    if (opt.log) *opt.log << "optimize " << to_string(s) << ": " << r.evaluations << " evaluations\n";
    list.push_back(to_json(r));
  }
  write_json(out, document(rc, "optimize", {{"schemes", list}}));
  return exit_code::ok;
}

struct SweepRow {
  double kappa_over_4wm = 0.0;
  Scheme scheme = Scheme::SB;
  double gamma_minus = 0.0;
  double gamma_plus = 0.0;
  double gamma_opt_normalized = 0.0;
  double n_f_rate_equation = 0.0;
  double n_f_lyapunov = 0.0;
  double g_opt = 0.0;
  double eps_opt = 0.0;
  double phi_eps = 0.0;
  double r_s = 0.0;
  double phi_s = 0.0;
  double gamma_tot = 0.0;
  bool stable = false;
  int evaluations = 0;
  std::string error;
  ErrorKind error_kind = ErrorKind::invalid_parameter;
};

inline constexpr std::string_view sweep_header =
    "kappa_over_4wm,scheme,gamma_minus,gamma_plus,gamma_opt_normalized,n_f_rate_equation,n_f_lyapunov,g_opt,"
    "eps_opt,phi_eps,r_s,phi_s,gamma_tot,stable,evaluations,error";

inline SweepRow sweep_point(const RunConfig& rc, double k4, Scheme scheme) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  SweepRow row{k4, scheme, nan, nan, nan, nan, nan, nan, nan, nan, nan, nan, nan, false, 0, {}, {}};
  ReducedParams base = rc.params;
  base.kappa = 4.0 * k4 * base.omega_m;
  if (rc.sweep->figure_detuning) base.delta = figure_detuning(base.kappa, base.omega_m);
  SearchSpec spec = rc.search;
  spec.workers = 1;
  try {
    const SweepObjective obj = rc.sweep->objective;
    if (obj != SweepObjective::phonons) {
      const OptimizationResult r = maximize_rate(base, scheme, spec);
      row.gamma_minus = r.gamma_minus_normalized;
      row.gamma_plus = r.gamma_plus_normalized;
      row.gamma_opt_normalized = r.gamma_opt_normalized;
      row.eps_opt = r.eps_opt;
      row.phi_eps = r.phi_eps_opt;
      row.r_s = r.r_s_opt;
      row.phi_s = r.phi_s_opt;
      row.stable = r.stable;
      row.evaluations += r.evaluations;
    }
    if (obj != SweepObjective::rate) {
      const OptimizationResult r = minimize_phonons(base, scheme, spec);
      if (obj == SweepObjective::phonons) {
        row.gamma_minus = r.gamma_minus_normalized;
        row.gamma_plus = r.gamma_plus_normalized;
        row.gamma_opt_normalized = r.gamma_opt_normalized;
      }
      row.n_f_rate_equation = r.n_f_rate_equation;
      row.n_f_lyapunov = r.n_f_min;
      row.g_opt = r.g_opt;
      row.eps_opt = r.eps_opt;
      row.phi_eps = r.phi_eps_opt;
      row.r_s = r.r_s_opt;
      row.phi_s = r.phi_s_opt;
      row.gamma_tot = r.gamma_tot;
      row.stable = r.stable;
      row.evaluations += r.evaluations;
    }
  } catch (const Error& e) {
    row.error = std::string(to_string(e.kind()));
    row.error_kind = e.kind();
  }
  return row;
}

inline std::string sweep_csv_line(const SweepRow& r) {
  const auto f = format_double;
  return f(r.kappa_over_4wm) + "," + std::string(to_string(r.scheme)) + "," + f(r.gamma_minus) + "," +
         f(r.gamma_plus) + "," + f(r.gamma_opt_normalized) + "," + f(r.n_f_rate_equation) + "," + f(r.n_f_lyapunov) +
         "," + f(r.g_opt) + "," + f(r.eps_opt) + "," + f(r.phi_eps) + "," + f(r.r_s) + "," + f(r.phi_s) + "," +
         f(r.gamma_tot) + "," + (r.stable ? "true" : "false") + "," + std::to_string(r.evaluations) + "," + r.error;
}

/// Runs every (kappa, scheme) task on a worker pool; rows are emitted in
/// sweep order regardless of completion order.
inline std::vector<SweepRow> run_sweep(const RunConfig& rc, unsigned workers, std::ostream* log) {
  if (!rc.sweep) throw ConfigError("sweep needs a [sweep] section");
  if (!rc.sweep->figure_detuning && rc.delta_is_figure)
    throw ConfigError("sweep.detuning = fixed needs a numeric reduced.delta");
  validate(rc.search);
  const std::vector<double> ks = rc.sweep->values();
  const std::size_t ns = rc.schemes.size();
  std::vector<SweepRow> rows(ks.size() * ns);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < rows.size(); i = next++) {
      rows[i] = sweep_point(rc, ks[i / ns], rc.schemes[i % ns]);
      ++done;
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(rows.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  if (log) *log << "sweep: " << done.load() << " rows\n";
  return rows;
}

inline int cmd_sweep(const RunConfig& rc, const std::string& format, std::ostream& out, const CommandOptions& opt) {
  require_format(format, "sweep");
  const std::vector<SweepRow> rows = run_sweep(rc, std::max(1u, opt.workers), opt.log);
  bool any_ok = false;
  bool any_infeasible = false;
  for (const SweepRow& r : rows) {
    if (r.error.empty())
      any_ok = true;
    else if (r.error_kind == ErrorKind::infeasible_suppression)
      any_infeasible = true;
  }
  if (format == "csv") {
    out << csv_preamble(rc) << sweep_header << '\n';
    for (const SweepRow& r : rows) out << sweep_csv_line(r) << '\n';
  } else {
    json list = json::array();
    for (const SweepRow& r : rows)
      list.push_back({{"kappa_over_4wm", r.kappa_over_4wm},
                      {"scheme", to_string(r.scheme)},
                      {"gamma_minus", r.gamma_minus},
                      {"gamma_plus", r.gamma_plus},
                      {"gamma_opt_normalized", r.gamma_opt_normalized},
                      {"n_f_rate_equation", r.n_f_rate_equation},
                      {"n_f_lyapunov", r.n_f_lyapunov},
                      {"g_opt", r.g_opt},
                      {"eps_opt", r.eps_opt},
                      {"phi_eps", r.phi_eps},
                      {"r_s", r.r_s},
                      {"phi_s", r.phi_s},
                      {"gamma_tot", r.gamma_tot},
                      {"stable", r.stable},
                      {"evaluations", r.evaluations},
                      {"error", r.error}});
    write_json(out, document(rc, "sweep", {{"rows", list}}));
  }
  if (!any_ok) return exit_code::unstable;
  return any_infeasible ? exit_code::infeasible : exit_code::ok;
}

inline int cmd_validate_adiabatic(const RunConfig& rc, const std::string& format, std::ostream& out) {
  require_format(format, "validate-adiabatic");
  if (!rc.full) throw ConfigError("validate-adiabatic needs a [full] section");
  const FullModelInput& in = *rc.full;
  const AdiabaticReport rep = adiabatic_report(in.params, in.steady);
  json result{{"classical",
               {{"alpha_s", complex_json(in.steady.alpha_s)},
                {"alpha_p", complex_json(in.steady.alpha_p)},
                {"beta", complex_json(in.steady.beta)},
                {"residual", in.steady.residual},
                {"delta_s_eff", in.steady.delta_s_eff},
                {"delta_p_eff", in.steady.delta_p_eff},
                {"iterations", in.steady.iterations},
                {"bistable", in.steady.bistable}}},
              {"reduced", to_json(rc.params)},
              {"frame_phase", in.frame_phase},
              {"adiabatic",
               {{"lhs", rep.lhs},
                {"rhs_terms", {rep.rhs_terms[0], rep.rhs_terms[1]}},
                {"margin", rep.margin},
                {"margin_required", adiabatic_margin_required},
                {"valid", rep.valid},
                {"detuning_shift_s", rep.detuning_shift_s},
                {"dissipation_shift_s", rep.dissipation_shift_s},
                {"mech_detuning_shift", rep.mech_detuning_shift},
                {"mech_squeezing", rep.mech_squeezing}}}};
  write_json(out, document(rc, "validate-adiabatic", result));
  return exit_code::ok;
}

/// Dispatches a subcommand. Library errors map onto exit codes; the message
/// goes to err.
inline int run_command(std::string_view command, const RunConfig& rc, std::string format, std::ostream& out,
                       std::ostream& err, const CommandOptions& opt = {}) {
  if (format.empty()) format = rc.format.empty() ? default_format(command) : rc.format;
  try {
    if (command == "spectrum") return cmd_spectrum(rc, format, out);
    if (command == "rates") return cmd_rates(rc, format, out);
    if (command == "suppress") return cmd_suppress(rc, format, out);
    if (command == "steady") return cmd_steady(rc, format, out);
    if (command == "optimize") return cmd_optimize(rc, format, out, opt);
    if (command == "sweep") return cmd_sweep(rc, format, out, opt);
    if (command == "validate-adiabatic") return cmd_validate_adiabatic(rc, format, out);
    err << "error: unknown command '" << command << "'\n";
    return exit_code::config;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return exit_code::config;
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code_for(e.kind());
  }
}

}  // namespace sqcool::cli
