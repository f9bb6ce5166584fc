#include "blowup/nls_solver.hpp"

#include <cmath>

#include "blowup/error.hpp"

namespace blowup {

void SolverConfig::validate() const {
  require(dt0 > 0.0, ErrorCode::config_error, "dt0 must be positive");
  require(relax_tol > 0.0 && relax_tol <= 1e-10, ErrorCode::config_error, "relax_tol must be in (0, 1e-10]");
  require(max_lambda_h > 0.0 && max_lambda_h < 0.5, ErrorCode::config_error, "max_lambda_h must be in (0, 0.5)");
  require(t_end > 0.0, ErrorCode::config_error, "t_end must be positive");
  require(max_linear_iterations > 0, ErrorCode::config_error, "max_linear_iterations must be positive");
  require(series_stride >= 1, ErrorCode::config_error, "series_stride must be >= 1");
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::horizon: return "horizon";
    case Termination::under_resolved: return "under_resolved";
    case Termination::diverged: return "diverged";
  }
  return "?";
}

NlsSolver::NlsSolver(Field2D u0, const SolverConfig& cfg) : u_(std::move(u0)), u_prev_(u_), cfg_(cfg) {
  cfg_.validate();
  u_.enforce_dirichlet();
  const std::size_t n = u_.grid().size();
  for (auto* v : {&r_, &z_, &p_, &q_, &x_, &b_}) v->assign(n, cplx(0.0, 0.0));
}

void NlsSolver::solve(const std::vector<double>& phi, double dt, Field2D& out) {
  const Grid2D& g = u_.grid();
  const auto nodes = g.interior_nodes();
  const std::size_t nx = g.nx();
  const double ih2 = 1.0 / (g.h() * g.h());
  const cplx itau(0.0, 0.5 * dt);
  const auto u = u_.values();

  // A x = x - i tau (Delta_h x + phi x), applied on interior nodes; other entries stay 0
  auto apply = [&](const std::vector<cplx>& x, std::vector<cplx>& y) {
    for (std::size_t a = 0; a < nodes.size(); ++a) {
      const std::size_t k = nodes[a];
      const cplx lap = (x[k + 1] + x[k - 1] + x[k + nx] + x[k - nx] - 4.0 * x[k]) * ih2;
      y[k] = x[k] - itau * (lap + phi[a] * x[k]);
    }
  };

  double bnorm = 0.0;
  for (std::size_t a = 0; a < nodes.size(); ++a) {
    const std::size_t k = nodes[a];
    const cplx lap = (u[k + 1] + u[k - 1] + u[k + nx] + u[k - nx] - 4.0 * u[k]) * ih2;
    b_[k] = u[k] + itau * (lap + phi[a] * u[k]);
    bnorm += std::norm(b_[k]);
  }
  bnorm = std::sqrt(bnorm);
  stats_ = {};
  auto ov = out.values();
  if (bnorm == 0.0) {
    for (std::size_t k : nodes) ov[k] = 0.0;
    return;
  }

  // initial guess: the current out (caller supplies an extrapolation)
  for (std::size_t k : nodes) x_[k] = ov[k];
  apply(x_, q_);
  cplx rho = 0.0;
  double rn = 0.0;
  for (std::size_t a = 0; a < nodes.size(); ++a) {
    const std::size_t k = nodes[a];
    r_[k] = b_[k] - q_[k];
    const cplx d = 1.0 - itau * (-4.0 * ih2 + phi[a]);
    z_[k] = r_[k] / d;
    p_[k] = z_[k];
    rho += r_[k] * z_[k];
    rn += std::norm(r_[k]);
  }
  double res = std::sqrt(rn) / bnorm;
  double best = res;
  int since_best = 0;
  int it = 0;
  while (res > cfg_.relax_tol) {
    if (it >= cfg_.max_linear_iterations || since_best > 50)
      throw Error(ErrorCode::linear_solver_stagnation,
                  "COCG stalled at relative residual " + std::to_string(res) + " after " + std::to_string(it) + " iterations");
    apply(p_, q_);
    cplx mu = 0.0;
    for (std::size_t k : nodes) mu += p_[k] * q_[k];
    if (std::abs(mu) == 0.0 || !std::isfinite(std::abs(mu)))
      throw Error(ErrorCode::linear_solver_stagnation, "COCG breakdown");
    const cplx alpha = rho / mu;
    rn = 0.0;
    for (std::size_t k : nodes) {
      x_[k] += alpha * p_[k];
      r_[k] -= alpha * q_[k];
      rn += std::norm(r_[k]);
    }
    ++it;
    res = std::sqrt(rn) / bnorm;
    if (!std::isfinite(res)) throw Error(ErrorCode::linear_solver_stagnation, "COCG produced a non-finite residual");
    if (res < 0.5 * best) {
      best = res;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (res <= cfg_.relax_tol) break;
    cplx rho_new = 0.0;
    for (std::size_t a = 0; a < nodes.size(); ++a) {
      const std::size_t k = nodes[a];
      const cplx d = 1.0 - itau * (-4.0 * ih2 + phi[a]);
      z_[k] = r_[k] / d;
      rho_new += r_[k] * z_[k];
    }
    const cplx beta = rho_new / rho;
    rho = rho_new;
    for (std::size_t k : nodes) p_[k] = z_[k] + beta * p_[k];
  }
  for (std::size_t k : nodes) ov[k] = x_[k];
  stats_.iterations = it;
  stats_.residual = res;
}

const Field2D& NlsSolver::step(double dt) {
  require(dt > 0.0 && std::isfinite(dt), ErrorCode::invalid_argument, "dt must be positive");
  const Grid2D& g = u_.grid();
  const auto nodes = g.interior_nodes();
  const auto u = u_.values();
  std::vector<double> phi(nodes.size());
  Field2D next = u_;  // initial guess: u^n, or linear extrapolation once u^{n-1} exists
  if (!started_) {
    for (std::size_t a = 0; a < nodes.size(); ++a) phi[a] = std::norm(u[nodes[a]]);
    solve(phi, dt, next);
    const int it0 = stats_.iterations;
    const auto nv = next.values();
    for (std::size_t a = 0; a < nodes.size(); ++a) phi[a] = std::norm(0.5 * (u[nodes[a]] + nv[nodes[a]]));
    solve(phi, dt, next);
    stats_.iterations += it0;
    started_ = true;
  } else {
    const double ratio = dt / dt_prev_;
    auto nv = next.values();
    const auto up = u_prev_.values();
    for (std::size_t a = 0; a < nodes.size(); ++a) {
      const std::size_t k = nodes[a];
      const double m = std::norm(u[k]);
      phi[a] = m + ratio * (m - phi_[a]);
      nv[k] = u[k] + ratio * (u[k] - up[k]);
    }
    solve(phi, dt, next);
  }
  phi_ = std::move(phi);
  dt_prev_ = dt;
  u_prev_ = std::move(u_);
  u_ = std::move(next);
  t_ += dt;
  return u_;
}

Field2D step(const Field2D& u, double dt, const SolverConfig& cfg) {
  NlsSolver s(u, cfg);
  return s.step(dt);
}

Trajectory evolve(const Field2D& u0, const SolverConfig& cfg, const DiagnosticsContext& ctx, const StepHook& hook) {
  cfg.validate();
  require(ctx.grad_q_sq > 0.0, ErrorCode::invalid_argument, "diagnostics context lacks ||grad Q||");
  NlsSolver solver(u0, cfg);
  Trajectory tr;
  const double h = u0.grid().h();
  const double gq = std::sqrt(ctx.grad_q_sq);

  tr.series.push_back(compute_row(solver.state(), 0.0, ctx));
  tr.snapshot_times.push_back(0.0);
  tr.snapshots.push_back(solver.state());
  if (hook) hook(0.0, solver.state());

  double m_prev = mass(solver.state());
  const double m0 = m_prev;
  std::size_t since_series = 0;
  bool last_recorded = true;
  while (solver.time() < cfg.t_end * (1.0 - 1e-14)) {
    if (tr.steps >= cfg.max_steps) {
      tr.message = "step budget exhausted";
      break;
    }
    const double gns = grad_norm_sq(solver.state());
    if (std::sqrt(gns) / gq * h > cfg.max_lambda_h) {
      tr.termination = Termination::under_resolved;
      tr.message = "lambda h exceeded " + std::to_string(cfg.max_lambda_h);
      break;
    }
    double dt = cfg.dt_policy == DtPolicy::fixed ? cfg.dt0 : cfg.dt0 / std::max(1.0, gns);
    dt = std::min(dt, cfg.t_end - solver.time());
    try {
      solver.step(dt);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::linear_solver_stagnation) throw;
      tr.termination = Termination::diverged;
      tr.message = e.what();
      break;
    }
    ++tr.steps;
    tr.linear_iterations += static_cast<std::size_t>(solver.last_stats().iterations);
    const double m = mass(solver.state());
    const double dm = std::abs(m - m_prev) / std::max(m0, 1e-300);
    if (!std::isfinite(m) || dm > 1e-8) {
      tr.termination = Termination::diverged;
      tr.message = std::isfinite(m) ? "mass jump in one step" : "non-finite state";
      break;
    }
    tr.max_step_mass_change = std::max(tr.max_step_mass_change, dm);
    m_prev = m;
    const double t = solver.time();
    if (hook) hook(t, solver.state());
    last_recorded = false;
    if (++since_series >= cfg.series_stride) {
      tr.series.push_back(compute_row(solver.state(), t, ctx));
      since_series = 0;
      last_recorded = true;
    }
    if (cfg.snapshot_stride > 0 && tr.steps % cfg.snapshot_stride == 0) {
      tr.snapshot_times.push_back(t);
      tr.snapshots.push_back(solver.state());
    }
  }
  if (tr.termination != Termination::diverged) {
    if (!last_recorded) tr.series.push_back(compute_row(solver.state(), solver.time(), ctx));
    if (tr.snapshot_times.back() < solver.time()) {
      tr.snapshot_times.push_back(solver.time());
      tr.snapshots.push_back(solver.state());
    }
  }
  return tr;
}

}  // namespace blowup
