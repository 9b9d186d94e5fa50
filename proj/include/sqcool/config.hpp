#pragma once

// Run configuration for the command-line front end.
//
// Input is a flat INI file (sections of key = value) or a JSON document whose
// "config" object holds the same sections. Unknown sections and keys are
// rejected. Values are kept as the original strings so that a configuration
// echoed into a JSON result re-ingests to the identical canonical form.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sqcool/cooling.hpp"
#include "sqcool/fullmodel.hpp"
#include "sqcool/model.hpp"

namespace sqcool::cli {

inline constexpr std::string_view version = "1.0.0";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Section = std::map<std::string, std::string>;
using ConfigTree = std::map<std::string, Section>;

inline const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s{
      {"run", {"scheme", "schemes", "manifold", "normalized", "seed"}},
      {"reduced",
       {"kappa", "kappa_over_4wm", "kappa0", "delta", "omega_m", "gamma", "q_m", "n_th", "temperature_k",
        "omega_m_rad_s", "g", "eps_mag", "eps_phase", "r_s", "phi_s"}},
      {"full",
       {"omega_m", "gamma", "q_m", "n_th", "temperature_k", "omega_m_rad_s", "delta_s", "delta_p", "kappa_s",
        "kappa_p", "g_s", "g_p", "eps0_re", "eps0_im", "drive_s_re", "drive_s_im", "drive_p_re", "drive_p_im",
        "r_s", "phi_s", "guess_alpha_s_re", "guess_alpha_s_im", "guess_alpha_p_re", "guess_alpha_p_im"}},
      {"grid", {"omega_min", "omega_max", "points", "omegas"}},
      {"sweep", {"kappa_over_4wm_min", "kappa_over_4wm_max", "points", "spacing", "detuning", "objective"}},
      {"search",
       {"objective", "mode", "g_min", "g_max", "eps_max_fraction", "r_s_max", "eps_pinned", "phi_eps_pinned",
        "starts_g", "starts_eps", "starts_phase", "starts_r_s", "min_starts", "max_evals", "convergence_diameter",
        "tie_tolerance", "jitter"}},
      {"output", {"path", "format"}},
  };
  return s;
}

inline void check_schema(const ConfigTree& tree) {
  const auto& s = schema();
  for (const auto& [section, keys] : tree) {
    const auto it = s.find(section);
    if (it == s.end()) throw ConfigError("unknown config section [" + section + "]");
    for (const auto& [key, value] : keys)
      if (!it->second.contains(key)) throw ConfigError("unknown key '" + key + "' in section [" + section + "]");
  }
}

inline std::string trim(std::string_view s) {
  const auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return std::string(s);
}

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline ConfigTree parse_ini(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  ConfigTree out;
  for (const auto& [section, node] : tree) {
    if (node.empty()) throw ConfigError("key '" + section + "' is outside any section");
    auto& sec = out[section];
    for (const auto& [key, leaf] : node) sec[key] = trim(leaf.data());
  }
  check_schema(out);
  return out;
}

inline ConfigTree parse_json_config(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("JSON config parse error: ") + e.what());
  }
  const nlohmann::json& cfg = doc.contains("config") ? doc.at("config") : doc;
  if (!cfg.is_object()) throw ConfigError("JSON config must be an object of sections");
  ConfigTree out;
  for (const auto& [section, keys] : cfg.items()) {
    if (!keys.is_object()) throw ConfigError("JSON config section '" + section + "' must be an object");
    auto& sec = out[section];
    for (const auto& [key, value] : keys.items()) {
      if (value.is_string())
        sec[key] = value.get<std::string>();
      else if (value.is_boolean())
        sec[key] = value.get<bool>() ? "true" : "false";
      else if (value.is_number_integer())
        sec[key] = value.dump();
      else if (value.is_number())
        sec[key] = format_double(value.get<double>());
      else
        throw ConfigError("JSON config value for '" + key + "' must be a string, number or boolean");
    }
  }
  check_schema(out);
  return out;
}

inline ConfigTree parse_config_text(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  return first != std::string::npos && text[first] == '{' ? parse_json_config(text) : parse_ini(text);
}

inline ConfigTree load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

/// Canonical text form: sorted sections and keys, one "key=value" per line.
inline std::string canonical_text(const ConfigTree& tree) {
  std::string out;
  for (const auto& [section, keys] : tree) {
    out += "[" + section + "]\n";
    for (const auto& [key, value] : keys) out += key + "=" + value + "\n";
  }
  return out;
}

/// 64-bit FNV-1a of the canonical text, as 16 hex digits.
inline std::string config_hash(const ConfigTree& tree) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical_text(tree)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline nlohmann::json to_json(const ConfigTree& tree) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [section, keys] : tree) {
    nlohmann::json s = nlohmann::json::object();
    for (const auto& [key, value] : keys) s[key] = value;
    j[section] = s;
  }
  return j;
}

// ---- typed value access ---------------------------------------------------

inline double parse_number(std::string_view text, std::string_view what) {
  const std::string t = trim(text);
  // angles may be written as multiples of pi: "pi", "0.5pi", "-pi"
  if (t.size() >= 2 && t.ends_with("pi")) {
    const std::string head = t.substr(0, t.size() - 2);
    double factor = 1.0;
    if (head == "-")
      factor = -1.0;
    else if (!head.empty())
      factor = parse_number(head, what);
    return factor * std::numbers::pi;
  }
  double v = 0.0;
  const char* b = t.data();
  const char* e = b + t.size();
  const auto res = std::from_chars(b, e, v);
  if (t.empty() || res.ec != std::errc{} || res.ptr != e || !std::isfinite(v))
    throw ConfigError("'" + std::string(what) + "' must be a finite number, got '" + t + "'");
  return v;
}

inline long long parse_integer(std::string_view text, std::string_view what) {
  const std::string t = trim(text);
  long long v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc{} || res.ptr != t.data() + t.size())
    throw ConfigError("'" + std::string(what) + "' must be an integer, got '" + t + "'");
  return v;
}

inline bool parse_bool(std::string_view text, std::string_view what) {
  std::string t = trim(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError("'" + std::string(what) + "' must be a boolean, got '" + t + "'");
}

inline std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in{std::string(text)};
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

class SectionView {
 public:
  SectionView(const ConfigTree& tree, std::string name) : name_(std::move(name)) {
    const auto it = tree.find(name_);
    if (it != tree.end()) keys_ = &it->second;
  }

  bool present() const { return keys_ != nullptr; }
  bool has(const std::string& key) const { return keys_ && keys_->contains(key); }

  std::optional<std::string> text(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return keys_->at(key);
  }
  std::optional<double> number(const std::string& key) const {
    const auto t = text(key);
    return t ? std::optional<double>(parse_number(*t, label(key))) : std::nullopt;
  }
  double number(const std::string& key, double fallback) const { return number(key).value_or(fallback); }
  std::optional<long long> integer(const std::string& key) const {
    const auto t = text(key);
    return t ? std::optional<long long>(parse_integer(*t, label(key))) : std::nullopt;
  }
  bool boolean(const std::string& key, bool fallback) const {
    const auto t = text(key);
    return t ? parse_bool(*t, label(key)) : fallback;
  }
  std::string label(const std::string& key) const { return name_ + "." + key; }

  void exclusive(const std::string& a, const std::string& b) const {
    if (has(a) && has(b)) throw ConfigError("give only one of " + label(a) + " and " + label(b));
  }

 private:
  std::string name_;
  const Section* keys_ = nullptr;
};

// ---- typed run configuration ----------------------------------------------

struct GridSpec {
  std::vector<double> omegas;
};

enum class SweepObjective { both, rate, phonons };

struct SweepSpec {
  double kappa_over_4wm_min = 0.0;
  double kappa_over_4wm_max = 0.0;
  int points = 0;
  bool log_spacing = true;
  bool figure_detuning = true;  // else keep the fixed [reduced] delta
  SweepObjective objective = SweepObjective::both;

  std::vector<double> values() const {
    std::vector<double> v(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) {
      const double t = static_cast<double>(i) / (points - 1);
      v[i] = log_spacing ? kappa_over_4wm_min * std::pow(kappa_over_4wm_max / kappa_over_4wm_min, t)
                         : kappa_over_4wm_min + t * (kappa_over_4wm_max - kappa_over_4wm_min);
    }
    v.front() = kappa_over_4wm_min;
    v.back() = kappa_over_4wm_max;
    return v;
  }
};

struct FullModelInput {
  FullModelParams params;
  ClassicalSteadyState steady;
  double frame_phase = 0.0;
};

struct RunConfig {
  ConfigTree tree;  // canonical, without the [output] section
  std::vector<Scheme> schemes;
  bool suppressed_manifold = true;
  bool normalized = true;
  std::uint64_t seed = 0;

  ReducedParams params;           // kappa may be NaN when only a sweep supplies it
  bool delta_is_figure = true;
  std::optional<FullModelInput> full;

  std::optional<GridSpec> grid;
  std::optional<SweepSpec> sweep;
  SearchSpec search;
  Objective objective = Objective::phonons;

  std::optional<std::string> out_path;
  std::string format;  // empty: command default
};

namespace detail {

inline double mechanical_gamma(const SectionView& s, double omega_m) {
  s.exclusive("gamma", "q_m");
  if (const auto q = s.number("q_m")) {
    if (!(*q > 0.0)) throw ConfigError(s.label("q_m") + " must be > 0");
    return omega_m / *q;
  }
  return s.number("gamma", 1e-5 * omega_m);
}

inline double mechanical_occupancy(const SectionView& s) {
  s.exclusive("n_th", "temperature_k");
  if (const auto t = s.number("temperature_k")) {
    const auto w = s.number("omega_m_rad_s");
    if (!w) throw ConfigError(s.label("temperature_k") + " needs " + s.label("omega_m_rad_s"));
    return thermal_occupancy(*t, *w);
  }
  if (s.has("omega_m_rad_s")) throw ConfigError(s.label("omega_m_rad_s") + " is only used with temperature_k");
  return s.number("n_th", 0.0);
}

inline void parse_reduced(const SectionView& s, RunConfig& rc) {
  ReducedParams& p = rc.params;
  if (const auto k0 = s.number("kappa0"); k0 && *k0 != 0.0)
    throw ConfigError("nonzero intrinsic cavity loss kappa0 is not supported");
  p.omega_m = s.number("omega_m", 1.0);
  if (!(p.omega_m > 0.0)) throw ConfigError("reduced.omega_m must be > 0");
  s.exclusive("kappa", "kappa_over_4wm");
  if (const auto k = s.number("kappa"))
    p.kappa = *k;
  else if (const auto r = s.number("kappa_over_4wm"))
    p.kappa = 4.0 * *r * p.omega_m;
  else
    p.kappa = std::nan("");

  const auto delta = s.text("delta");
  rc.delta_is_figure = !delta || trim(*delta) == "figure";
  p.delta = rc.delta_is_figure ? (std::isnan(p.kappa) ? std::nan("") : figure_detuning(p.kappa, p.omega_m))
                               : parse_number(*delta, s.label("delta"));
  p.gamma = mechanical_gamma(s, p.omega_m);
  p.n_th = mechanical_occupancy(s);
  p.g_coupling = s.number("g", 1.0);
  p.eps_mag = s.number("eps_mag", 0.0);
  p.eps_phase = s.number("eps_phase", 0.0);
  p.bath = make_bath(s.number("r_s", 0.0), s.number("phi_s", 0.0));
}

inline void parse_full(const SectionView& s, RunConfig& rc) {
  FullModelParams f;
  f.omega_m = s.number("omega_m", 1.0);
  f.gamma = mechanical_gamma(s, f.omega_m);
  f.n_th = mechanical_occupancy(s);
  auto need = [&](const std::string& key) {
    const auto v = s.number(key);
    if (!v) throw ConfigError("missing required key " + s.label(key));
    return *v;
  };
  f.delta_s = need("delta_s");
  f.delta_p = need("delta_p");
  f.kappa_s = need("kappa_s");
  f.kappa_p = need("kappa_p");
  f.g_s = need("g_s");
  f.g_p = s.number("g_p", 0.0);
  f.eps0 = {s.number("eps0_re", 0.0), s.number("eps0_im", 0.0)};
  f.drive_s = {s.number("drive_s_re", 0.0), s.number("drive_s_im", 0.0)};
  f.drive_p = {s.number("drive_p_re", 0.0), s.number("drive_p_im", 0.0)};
  f.bath = make_bath(s.number("r_s", 0.0), s.number("phi_s", 0.0));

  FullModelInput in;
  in.params = f;
  std::optional<Amplitudes> guess;
  const bool has_guess = s.has("guess_alpha_s_re") || s.has("guess_alpha_s_im") || s.has("guess_alpha_p_re") ||
                         s.has("guess_alpha_p_im");
  if (has_guess)
    guess = Amplitudes{{s.number("guess_alpha_s_re", 0.0), s.number("guess_alpha_s_im", 0.0)},
                       {s.number("guess_alpha_p_re", 0.0), s.number("guess_alpha_p_im", 0.0)},
                       {}};
  in.steady = classical_steady_state(f, guess);
  const ReducedModel rm = extract_reduced(f, in.steady);
  in.frame_phase = rm.frame_phase;
  rc.params = rm.params;
  rc.delta_is_figure = false;
  rc.full = in;
}

inline void parse_search(const SectionView& s, RunConfig& rc) {
  SearchSpec& sp = rc.search;
  if (const auto o = s.text("objective")) {
    if (*o == "phonons")
      rc.objective = Objective::phonons;
    else if (*o == "rate")
      rc.objective = Objective::rate;
    else
      throw ConfigError("search.objective must be 'phonons' or 'rate'");
  }
  if (const auto m = s.text("mode")) {
    if (*m == "suppressed")
      sp.mode = SearchMode::suppressed;
    else if (*m == "free")
      sp.mode = SearchMode::free;
    else
      throw ConfigError("search.mode must be 'suppressed' or 'free'");
  }
  sp.g_min = s.number("g_min", sp.g_min);
  sp.g_max = s.number("g_max", sp.g_max);
  sp.eps_max_fraction = s.number("eps_max_fraction", sp.eps_max_fraction);
  sp.r_s_max = s.number("r_s_max", sp.r_s_max);
  if (const auto v = s.number("eps_pinned")) sp.eps_pinned = *v;
  if (const auto v = s.number("phi_eps_pinned")) sp.phi_eps_pinned = *v;
  auto count = [&](const std::string& key, int fallback) {
    const auto v = s.integer(key);
    if (!v) return fallback;
    if (*v < 1 || *v > 100000) throw ConfigError(s.label(key) + " must lie in [1, 100000]");
    return static_cast<int>(*v);
  };
  sp.starts_g = count("starts_g", sp.starts_g);
  sp.starts_eps = count("starts_eps", sp.starts_eps);
  sp.starts_phase = count("starts_phase", sp.starts_phase);
  sp.starts_r_s = count("starts_r_s", sp.starts_r_s);
  sp.min_starts = count("min_starts", sp.min_starts);
  sp.max_evaluations = count("max_evals", sp.max_evaluations);
  sp.convergence_diameter = s.number("convergence_diameter", sp.convergence_diameter);
  sp.tie_tolerance = s.number("tie_tolerance", sp.tie_tolerance);
  sp.jitter = s.number("jitter", sp.jitter);
  try {
    validate(sp);
  } catch (const Error& e) {
    throw ConfigError(std::string("search: ") + e.what());
  }
}

inline void parse_grid(const SectionView& s, RunConfig& rc) {
  GridSpec g;
  if (s.has("omegas")) {
    if (s.has("omega_min") || s.has("omega_max") || s.has("points"))
      throw ConfigError("grid.omegas excludes omega_min/omega_max/points");
    for (const std::string& item : split_list(*s.text("omegas"))) g.omegas.push_back(parse_number(item, "grid.omegas"));
  } else {
    const auto n = s.integer("points").value_or(0);
    if (n < 0 || n > 10000000) throw ConfigError("grid.points out of range");
    const auto lo = s.number("omega_min");
    const auto hi = s.number("omega_max");
    if (n > 0 && (!lo || !hi)) throw ConfigError("grid needs omega_min and omega_max");
    if (n == 1) {
      if (*lo != *hi) throw ConfigError("a one-point grid needs omega_min == omega_max");
      g.omegas.push_back(*lo);
    } else if (n > 1) {
      if (!(*hi > *lo)) throw ConfigError("grid needs omega_max > omega_min");
      for (long long i = 0; i < n; ++i) g.omegas.push_back(*lo + (*hi - *lo) * static_cast<double>(i) / (n - 1));
    }
  }
  if (g.omegas.empty()) throw ConfigError("frequency grid is empty");
  rc.grid = g;
}

inline void parse_sweep(const SectionView& s, RunConfig& rc) {
  SweepSpec w;
  const auto lo = s.number("kappa_over_4wm_min");
  const auto hi = s.number("kappa_over_4wm_max");
  if (!lo || !hi) throw ConfigError("sweep needs kappa_over_4wm_min and kappa_over_4wm_max");
  w.kappa_over_4wm_min = *lo;
  w.kappa_over_4wm_max = *hi;
  const auto n = s.integer("points");
  if (!n || *n < 2 || *n > 100000) throw ConfigError("sweep.points must be an integer >= 2");
  w.points = static_cast<int>(*n);
  if (!(w.kappa_over_4wm_min > 0.0) || !(w.kappa_over_4wm_max > w.kappa_over_4wm_min))
    throw ConfigError("sweep needs 0 < kappa_over_4wm_min < kappa_over_4wm_max");
  const std::string spacing = s.text("spacing").value_or("log");
  if (spacing != "log" && spacing != "linear") throw ConfigError("sweep.spacing must be 'log' or 'linear'");
  w.log_spacing = spacing == "log";
  const std::string det = s.text("detuning").value_or("figure");
  if (det != "figure" && det != "fixed") throw ConfigError("sweep.detuning must be 'figure' or 'fixed'");
  w.figure_detuning = det == "figure";
  const std::string obj = s.text("objective").value_or("both");
  if (obj == "both")
    w.objective = SweepObjective::both;
  else if (obj == "rate")
    w.objective = SweepObjective::rate;
  else if (obj == "phonons")
    w.objective = SweepObjective::phonons;
  else
    throw ConfigError("sweep.objective must be 'both', 'rate' or 'phonons'");
  rc.sweep = w;
}

}  // namespace detail

/// Builds the typed configuration. The seed override, when given, is written
/// into [run] so that it is part of the canonical form and the hash.
inline RunConfig build_run_config(ConfigTree tree, std::optional<std::uint64_t> seed_override = std::nullopt) {
  check_schema(tree);
  RunConfig rc;
  if (const auto it = tree.find("output"); it != tree.end()) {
    const SectionView out(tree, "output");
    rc.out_path = out.text("path");
    if (const auto f = out.text("format")) {
      if (*f != "csv" && *f != "json") throw ConfigError("output.format must be 'csv' or 'json'");
      rc.format = *f;
    }
    tree.erase(it);
  }
  if (seed_override) tree["run"]["seed"] = std::to_string(*seed_override);
  rc.tree = tree;

  const SectionView run(tree, "run");
  run.exclusive("scheme", "schemes");
  const std::string list = run.text("scheme").value_or(run.text("schemes").value_or("SB,ES,IS,ESIS"));
  try {
    for (const std::string& name : split_list(list)) {
      const Scheme s = parse_scheme(name);
      if (std::find(rc.schemes.begin(), rc.schemes.end(), s) != rc.schemes.end())
        throw ConfigError("scheme " + name + " listed twice");
      rc.schemes.push_back(s);
    }
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (rc.schemes.empty()) throw ConfigError("no scheme selected");
  const std::string manifold = run.text("manifold").value_or("suppressed");
  if (manifold != "suppressed" && manifold != "as_given")
    throw ConfigError("run.manifold must be 'suppressed' or 'as_given'");
  rc.suppressed_manifold = manifold == "suppressed";
  rc.normalized = run.boolean("normalized", true);
  if (const auto seed = run.integer("seed")) {
    if (*seed < 0) throw ConfigError("run.seed must be >= 0");
    rc.seed = static_cast<std::uint64_t>(*seed);
  }

  const SectionView reduced(tree, "reduced");
  const SectionView full(tree, "full");
  if (reduced.present() == full.present()) throw ConfigError("give exactly one of the [reduced] and [full] sections");
  try {
    if (reduced.present())
      detail::parse_reduced(reduced, rc);
    else
      detail::parse_full(full, rc);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::invalid_parameter) throw;
    throw ConfigError(e.what());
  }

  if (const SectionView g(tree, "grid"); g.present()) detail::parse_grid(g, rc);
  if (const SectionView w(tree, "sweep"); w.present()) detail::parse_sweep(w, rc);
  detail::parse_search(SectionView(tree, "search"), rc);
  rc.search.seed = rc.seed;
  return rc;
}

}  // namespace sqcool::cli
