#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "sqcool/cooling.hpp"
#include "sqcool/simplex.hpp"

using namespace sqcool;

namespace {

void expect_kind(ErrorKind kind, auto&& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected error " << to_string(kind);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

oracle::Model to_oracle(const ReducedParams& p) {
  return {p.delta, p.kappa, p.omega_m, p.gamma, p.g_coupling, p.n_th, p.bath.r_s, p.bath.phi_s, p.eps()};
}

SearchSpec quick_spec() {
  SearchSpec s;
  s.seed = 3;
  return s;
}

}  // namespace

TEST(NelderMead, Rosenbrock) {
  auto f = [](const std::vector<double>& x) {
    return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
  };
  NelderMeadOptions opt;
  opt.max_evaluations = 5000;
  opt.diameter_tolerance = 1e-10;
  const NelderMeadResult r = nelder_mead(f, {-1.2, 1.0}, {0.5, 0.5}, opt);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.x[0], 1.0, 1e-6);
  EXPECT_NEAR(r.x[1], 1.0, 1e-6);
}

TEST(NelderMead, InfeasibleRegionRanksWorst) {
  auto f = [](const std::vector<double>& x) { return x[0] < 0.0 ? NAN : (x[0] - 0.3) * (x[0] - 0.3); };
  const NelderMeadResult r = nelder_mead(f, {1.0}, {-2.0});
  EXPECT_NEAR(r.x[0], 0.3, 1e-5);
  EXPECT_LE(r.evaluations, NelderMeadOptions{}.max_evaluations + 2);
}

TEST(NelderMead, BudgetStopsSearch) {
  auto f = [](const std::vector<double>& x) { return x[0] * x[0] + x[1] * x[1]; };
  NelderMeadOptions opt;
  opt.max_evaluations = 10;
  const NelderMeadResult r = nelder_mead(f, {5.0, 5.0}, {1.0, 1.0}, opt);
  EXPECT_FALSE(r.converged);
  EXPECT_LE(r.evaluations, 12);
}

TEST(RateEquation, MatchesFormula) {
  ReducedParams p = comparison_point(1.0);
  p.g_coupling = 0.05;
  const RateSet r = rates(p, Scheme::SB, false);
  EXPECT_DOUBLE_EQ(rate_equation_limit(p, Scheme::SB).n_f,
                   oracle::rate_equation(p.gamma, p.n_th, r.gamma_minus, r.gamma_plus));
}

TEST(RateEquation, HeatingDiverges) {
  ReducedParams p = comparison_point(0.25);
  p.delta = -1.0;
  p.g_coupling = 0.1;
  expect_kind(ErrorKind::heating_divergence, [&] { rate_equation_limit(p, Scheme::SB); });
}

TEST(CoolingLimit, WeakCouplingAgreement) {
  // kappa in [0.2, 3] w_m, G <= kappa/20, Gamma_opt/gamma in [0.1, 10]
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int n = 0;
  double worst = 0.0;
  while (n < 100) {
    ReducedParams p;
    p.kappa = 0.2 * std::pow(15.0, u(rng));
    p.delta = 0.5 + u(rng);
    p.gamma = std::pow(10.0, -6.0 + 2.0 * u(rng));
    p.n_th = std::pow(10.0, 2.0 + 2.0 * u(rng));
    p.bath = make_bath(u(rng) < 0.5 ? u(rng) : 0.0, std::numbers::pi * u(rng));
    p.eps_mag = 0.5 * u(rng) * opo_threshold(p);
    p.eps_phase = 2.0 * std::numbers::pi * u(rng);
    p.g_coupling = 1.0;
    const RateSet unit = rates(p, Scheme::ESIS, false);
    if (!(unit.gamma_opt > 0.0)) continue;
    const double ratio = std::pow(10.0, -1.0 + 2.0 * u(rng));
    p.g_coupling = std::sqrt(ratio * p.gamma / unit.gamma_opt);
    if (p.g_coupling > p.kappa / 20.0) continue;
    ++n;
    const double exact = exact_limit(p, Scheme::ESIS).n_f;
    const double approx = rate_equation_limit(p, Scheme::ESIS).n_f;
    worst = std::max(worst, std::abs(exact - approx) / exact);
  }
  EXPECT_LT(worst, 0.01);
}

TEST(CoolingLimit, ResolvedSidebandExample) {
  // G = 1e-3, kappa = 0.04, delta = 1, gamma = 1e-5, n_th = 1e3
  ReducedParams p;
  p.kappa = 0.04;
  p.delta = 1.0;
  p.gamma = 1e-5;
  p.n_th = 1e3;
  p.g_coupling = 1e-3;
  const double exact = exact_limit(p, Scheme::SB).n_f;
  EXPECT_NEAR(exact, oracle::phonons(to_oracle(p)), 1e-6 * exact);
  EXPECT_NEAR(rate_equation_limit(p, Scheme::SB).n_f / exact, 1.0, 0.01);
}

TEST(Floor, ExactAtReferencePoint) {
  EXPECT_EQ(min_phonon_floor(1e5, 1e3), 0.12);
  EXPECT_DOUBLE_EQ(min_phonon_floor(1e4, 0.0), 0.0);
  expect_kind(ErrorKind::invalid_parameter, [] { min_phonon_floor(0.0, 1.0); });
}

TEST(SearchSpec, Validation) {
  SearchSpec s;
  EXPECT_NO_THROW(validate(s));
  s.g_max = s.g_min;
  expect_kind(ErrorKind::invalid_parameter, [&] { validate(s); });
  s = {};
  s.eps_max_fraction = 1.0;
  expect_kind(ErrorKind::invalid_parameter, [&] { validate(s); });
  s = {};
  s.starts_g = 0;
  expect_kind(ErrorKind::invalid_parameter, [&] { validate(s); });
}

TEST(Optimize, DeterministicUnderSeed) {
  const ReducedParams base = comparison_point(100.0);
  SearchSpec s = quick_spec();
  const OptimizationResult a = minimize_phonons(base, Scheme::ESIS, s);
  const OptimizationResult b = minimize_phonons(base, Scheme::ESIS, s);
  s.workers = 4;
  const OptimizationResult c = minimize_phonons(base, Scheme::ESIS, s);
  EXPECT_EQ(a.n_f_min, b.n_f_min);
  EXPECT_EQ(a.g_opt, b.g_opt);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.evaluations, b.evaluations);
  EXPECT_EQ(a.params, c.params);
  EXPECT_EQ(a.n_f_min, c.n_f_min);
}

TEST(Optimize, ResultReevaluates) {
  const OptimizationResult r = minimize_phonons(comparison_point(100.0), Scheme::ESIS, quick_spec());
  EXPECT_EQ(exact_limit(r.params, Scheme::ESIS).n_f, r.n_f_min);
  EXPECT_TRUE(r.stable);
  EXPECT_LE(r.gamma_plus_normalized, 1e-10 * r.gamma_minus_normalized);
  EXPECT_NEAR(r.gamma_tot, r.gamma_opt_normalized * r.g_opt * r.g_opt, 1e-12 * r.gamma_tot);
  EXPECT_NEAR(r.gamma_net, rates(r.params, Scheme::ESIS, false).gamma_opt, 1e-9 * r.gamma_net);
}

TEST(Optimize, SidebandHasOnlyCoupling) {
  const OptimizationResult r = minimize_phonons(comparison_point(1.0), Scheme::SB, quick_spec());
  EXPECT_EQ(r.eps_opt, 0.0);
  EXPECT_EQ(r.r_s_opt, 0.0);
  EXPECT_GT(r.g_opt, 0.0);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.n_f_min, 0.855, 0.01);
}

TEST(Optimize, EmptyFeasibleSet) {
  SearchSpec s = quick_spec();
  s.eps_pinned = 120.0;
  s.phi_eps_pinned = 0.0;
  expect_kind(ErrorKind::empty_feasible_set, [&] { minimize_phonons(comparison_point(100.0), Scheme::ESIS, s); });
}

TEST(Optimize, RateObjectiveIgnoresCoupling) {
  SearchSpec s = quick_spec();
  s.eps_pinned = 141.4;
  s.phi_eps_pinned = std::numbers::pi;
  const OptimizationResult r = maximize_rate(comparison_point(100.0), Scheme::ESIS, s);
  EXPECT_TRUE(std::isnan(r.n_f_min));
  EXPECT_NEAR(r.gamma_opt_normalized, 481.05, 0.05);
  EXPECT_EQ(r.objective_value, -r.gamma_opt_normalized);
}

TEST(Optimize, FreeModeSearchesBath) {
  SearchSpec s = quick_spec();
  s.mode = SearchMode::free;
  const OptimizationResult r = minimize_phonons(comparison_point(1.0), Scheme::ES, s);
  const OptimizationResult sup = minimize_phonons(comparison_point(1.0), Scheme::ES, quick_spec());
  // free search over (r_s, phi_s) can only do as well or better, up to the tie window
  EXPECT_LE(r.n_f_min, sup.n_f_min * (1.0 + s.tie_tolerance) + 1e-9);
  EXPECT_TRUE(r.stable);
}
