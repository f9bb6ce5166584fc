#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace blowup {

enum class ErrorCode {
  invalid_argument,
  bracket_not_found,
  non_convergence,
  grid_too_coarse,
  under_resolved,
  geometry_violation,
  projector_rank_deficient,
  eigensolver_failure,
  linear_solver_stagnation,
  supercritical_mass,
  core_unresolved,
  off_domain_center,
  insufficient_growth,
  config_error,
  io_error,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; `code()` identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::bracket_not_found: return "bracket-not-found";
    case ErrorCode::non_convergence: return "non-convergence";
    case ErrorCode::grid_too_coarse: return "grid-too-coarse";
    case ErrorCode::under_resolved: return "under-resolved";
    case ErrorCode::geometry_violation: return "geometry-violation";
    case ErrorCode::projector_rank_deficient: return "projector-rank-deficient";
    case ErrorCode::eigensolver_failure: return "eigensolver-non-convergence";
    case ErrorCode::linear_solver_stagnation: return "linear-solver-stagnation";
    case ErrorCode::supercritical_mass: return "supercritical-mass";
    case ErrorCode::core_unresolved: return "core-unresolved";
    case ErrorCode::off_domain_center: return "off-domain-center";
    case ErrorCode::insufficient_growth: return "insufficient-growth";
    case ErrorCode::config_error: return "config-error";
    case ErrorCode::io_error: return "io-error";
  }
  return "unknown";
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace blowup
