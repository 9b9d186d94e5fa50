#pragma once

// Derivative-free Nelder-Mead simplex minimizer.
//
// Non-finite objective values are ranked worst, so infeasible regions can be
// reported as +inf by the caller.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

namespace sqcool {

struct NelderMeadOptions {
  double reflection = 1.0;
  double expansion = 2.0;
  double contraction = 0.5;
  double shrink = 0.5;
  int max_evaluations = 2000;
  double diameter_tolerance = 1e-6;  // in the caller's (scaled) coordinates
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = std::numeric_limits<double>::infinity();
  int evaluations = 0;
  bool converged = false;
};

namespace detail {

inline bool ranks_before(double lhs, double rhs) {
  if (std::isnan(lhs)) return false;
  if (std::isnan(rhs)) return true;
  return lhs < rhs;
}

}  // namespace detail

template <class Objective>
NelderMeadResult nelder_mead(Objective&& f, std::vector<double> x0, const std::vector<double>& step,
                             const NelderMeadOptions& opt = {}) {
  const std::size_t n = x0.size();
  NelderMeadResult res;
  if (n == 0) {
    res.value = f(x0);
    res.x = std::move(x0);
    res.evaluations = 1;
    res.converged = true;
    return res;
  }

  struct Vertex {
    std::vector<double> x;
    double f;
  };
  int evals = 0;
  auto eval = [&](const std::vector<double>& x) {
    ++evals;
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };

  std::vector<Vertex> s;
  s.reserve(n + 1);
  s.push_back({x0, eval(x0)});
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<double> x = x0;
    x[k] += step[k];
    s.push_back({x, eval(x)});
  }

  auto order = [&] {
    std::stable_sort(s.begin(), s.end(), [](const Vertex& a, const Vertex& b) { return detail::ranks_before(a.f, b.f); });
  };
  auto diameter = [&] {
    double d = 0.0;
    for (std::size_t v = 1; v <= n; ++v)
      for (std::size_t k = 0; k < n; ++k) d = std::max(d, std::abs(s[v].x[k] - s[0].x[k]));
    return d;
  };
  auto along = [&](const std::vector<double>& c, const std::vector<double>& w, double t) {
    std::vector<double> x(n);
    for (std::size_t k = 0; k < n; ++k) x[k] = c[k] + t * (w[k] - c[k]);
    return x;
  };

  order();
  while (true) {
    if (diameter() < opt.diameter_tolerance) {
      res.converged = true;
      break;
    }
    if (evals >= opt.max_evaluations) break;

    std::vector<double> c(n, 0.0);
    for (std::size_t v = 0; v < n; ++v)
      for (std::size_t k = 0; k < n; ++k) c[k] += s[v].x[k] / static_cast<double>(n);

    Vertex& worst = s[n];
    const std::vector<double> xr = along(c, worst.x, -opt.reflection);
    const double fr = eval(xr);

    if (fr < s[0].f) {
      const std::vector<double> xe = along(c, worst.x, -opt.reflection * opt.expansion);
      const double fe = eval(xe);
      if (fe < fr)
        worst = {xe, fe};
      else
        worst = {xr, fr};
    } else if (fr < s[n - 1].f) {
      worst = {xr, fr};
    } else {
      // contraction, outside if the reflected point beats the worst vertex
      const bool outside = fr < worst.f;
      const std::vector<double> xc =
          outside ? along(c, worst.x, -opt.reflection * opt.contraction) : along(c, worst.x, opt.contraction);
      const double fc = eval(xc);
      if (fc < (outside ? fr : worst.f)) {
        worst = {xc, fc};
      } else {
        for (std::size_t v = 1; v <= n; ++v) {
          s[v].x = along(s[0].x, s[v].x, opt.shrink);
          s[v].f = eval(s[v].x);
        }
      }
    }
    order();
  }

  res.x = s[0].x;
  res.value = s[0].f;
  res.evaluations = evals;
  return res;
}

}  // namespace sqcool
