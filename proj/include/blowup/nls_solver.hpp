#pragma once

#include <functional>
#include <string>
#include <vector>

#include "blowup/diagnostics.hpp"
#include "blowup/grid.hpp"

namespace blowup {

enum class DtPolicy { fixed, adaptive };

struct SolverConfig {
  double dt0 = 1e-3;                 // fixed step, or c in dt = c / max(1, ||grad u||^2)
  DtPolicy dt_policy = DtPolicy::adaptive;
  double relax_tol = 1e-13;          // relative residual of the linear solve
  double max_lambda_h = 0.2;
  double t_end = 1.0;
  int max_linear_iterations = 500;
  std::size_t snapshot_stride = 0;   // 0: no snapshots besides the first and last
  std::size_t series_stride = 1;
  std::size_t max_steps = 10'000'000;

  void validate() const;
};

enum class Termination { horizon, under_resolved, diverged };
std::string to_string(Termination t);

struct Trajectory {
  std::vector<double> snapshot_times;
  std::vector<Field2D> snapshots;
  DiagnosticsSeries series;
  Termination termination = Termination::horizon;
  std::string message;
  std::size_t steps = 0;
  std::size_t linear_iterations = 0;
  double max_step_mass_change = 0.0;  // relative, per step
};

struct StepStats {
  int iterations = 0;
  double residual = 0.0;
};

/// Crank-Nicolson with relaxation of the cubic term:
///   (u^{n+1} - u^n)/dt = i (Delta_h + phi^{n+1/2}) (u^{n+1} + u^n)/2,
///   phi^{n+1/2} = |u^n|^2 + (dt_n/dt_{n-1}) (|u^n|^2 - phi^{n-1/2}),
/// which reduces to 2|u^n|^2 - phi^{n-1/2} for constant steps. The first step
/// is a predictor-corrector with phi^{1/2} = |(u^0 + u^1)/2|^2.
/// Linear systems are complex symmetric and solved by Jacobi-preconditioned COCG.
class NlsSolver {
 public:
  NlsSolver(Field2D u0, const SolverConfig& cfg);

  const Field2D& state() const { return u_; }
  double time() const { return t_; }
  /// Advances by dt; throws linear-solver-stagnation if the solve does not converge.
  const Field2D& step(double dt);
  StepStats last_stats() const { return stats_; }

 private:
  void solve(const std::vector<double>& phi, double dt, Field2D& out);

  Field2D u_;
  Field2D u_prev_;
  SolverConfig cfg_;
  std::vector<double> phi_;  // phi^{n-1/2} on interior nodes (indexed like interior_nodes)
  double t_ = 0.0;
  double dt_prev_ = 0.0;
  bool started_ = false;
  StepStats stats_;
  // scratch
  std::vector<cplx> r_, z_, p_, q_, x_, b_;
};

/// Single step with fresh relaxation state (for tests: u = 0 -> 0, unitarity).
Field2D step(const Field2D& u, double dt, const SolverConfig& cfg = {});

/// Called after every accepted step with the current time and state.
using StepHook = std::function<void(double t, const Field2D& u)>;

/// Evolves until t_end, lambda h > max_lambda_h, or divergence (NaN, stagnation, mass jump).
Trajectory evolve(const Field2D& u0, const SolverConfig& cfg, const DiagnosticsContext& ctx,
                  const StepHook& hook = {});

}  // namespace blowup
