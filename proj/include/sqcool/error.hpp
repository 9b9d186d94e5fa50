#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sqcool {

enum class ErrorKind {
  invalid_parameter,
  singularity,
  degenerate_parameter,
  infeasible_suppression,
  instability,
  heating_divergence,
  empty_feasible_set,
  numerical_failure,
  convergence,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_parameter: return "invalid-parameter";
    case ErrorKind::singularity: return "singularity";
    case ErrorKind::degenerate_parameter: return "degenerate-parameter";
    case ErrorKind::infeasible_suppression: return "infeasible-suppression";
    case ErrorKind::instability: return "instability";
    case ErrorKind::heating_divergence: return "heating-divergence";
    case ErrorKind::empty_feasible_set: return "empty-feasible-set";
    case ErrorKind::numerical_failure: return "numerical-failure";
    case ErrorKind::convergence: return "convergence";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Drift matrix has an eigenvalue with real part above the stability margin.
class InstabilityError : public Error {
 public:
  InstabilityError(const std::string& what, double max_real_eig)
      : Error(ErrorKind::instability, what), max_real_eig_(max_real_eig) {}

  double max_real_eig() const noexcept { return max_real_eig_; }

 private:
  double max_real_eig_;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : Error(ErrorKind::convergence, what), last_residual_(last_residual) {}

  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace sqcool
