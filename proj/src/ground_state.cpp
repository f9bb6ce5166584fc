#include "blowup/ground_state.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "blowup/error.hpp"

namespace blowup {

namespace {

struct State {
  double q;
  double p;
};

State rhs(double r, State s) { return {s.p, s.q - s.q * s.q * s.q - s.p / r}; }

State rk4(double r, State s, double h) {
  const State k1 = rhs(r, s);
  const State k2 = rhs(r + 0.5 * h, {s.q + 0.5 * h * k1.q, s.p + 0.5 * h * k1.p});
  const State k3 = rhs(r + 0.5 * h, {s.q + 0.5 * h * k2.q, s.p + 0.5 * h * k2.p});
  const State k4 = rhs(r + h, {s.q + h * k3.q, s.p + h * k3.p});
  return {s.q + h / 6.0 * (k1.q + 2 * k2.q + 2 * k3.q + k4.q), s.p + h / 6.0 * (k1.p + 2 * k2.p + 2 * k3.p + k4.p)};
}

// Series start removes the 1/r singularity: Q(r) ~ q0 + a r^2 + b r^4 with
// a = (q0 - q0^3) / 4 and b = (1 - 3 q0^2) a / 16.
State series_start(double q0, double r) {
  const double a = 0.25 * (q0 - q0 * q0 * q0);
  const double b = (1.0 - 3.0 * q0 * q0) * a / 16.0;
  const double r2 = r * r;
  return {q0 + a * r2 + b * r2 * r2, 2.0 * a * r + 4.0 * b * r2 * r};
}

struct Shot {
  std::vector<double> q;
  std::vector<double> p;
  ShotOutcome outcome = ShotOutcome::none;
  std::size_t event_index = 0;  // first index at which the outcome was detected
};

Shot integrate(double q0, std::size_t n, double h, const ShootingOptions& opts, bool keep) {
  Shot shot;
  if (keep) {
    shot.q.resize(n + 1);
    shot.p.resize(n + 1);
    shot.q[0] = q0;
    shot.p[0] = 0.0;
  }
  State s = series_start(q0, h);
  shot.event_index = n + 1;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i > 1) s = rk4(static_cast<double>(i - 1) * h, s, h);
    if (keep) {
      shot.q[i] = s.q;
      shot.p[i] = s.p;
    }
    if (shot.outcome == ShotOutcome::none) {
      if (s.q < 0.0) {
        shot.outcome = ShotOutcome::crossing;
      } else if (s.q > opts.divergence_level) {
        shot.outcome = ShotOutcome::divergence;
      } else if (s.p > 0.0) {
        shot.outcome = ShotOutcome::turning_back;
      }
      if (shot.outcome != ShotOutcome::none) {
        shot.event_index = i;
        if (!keep) return shot;
      }
    }
  }
  return shot;
}

bool overshoots(ShotOutcome o) { return o == ShotOutcome::crossing; }

std::size_t grid_count(double r_max, double h) { return static_cast<std::size_t>(std::lround(r_max / h)); }

}  // namespace

double RadialProfile::value(double r) const {
  r = std::abs(r);
  if (r >= r_max() || r_grid.size() < 2) return 0.0;
  const auto i = std::min(static_cast<std::size_t>(r / h), r_grid.size() - 2);
  const double t = (r - r_grid[i]) / h;
  const double t2 = t * t, t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t, h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
  return h00 * q_values[i] + h10 * h * q_prime[i] + h01 * q_values[i + 1] + h11 * h * q_prime[i + 1];
}

double RadialProfile::derivative(double r) const {
  r = std::abs(r);
  if (r >= r_max() || r_grid.size() < 2) return 0.0;
  const auto i = std::min(static_cast<std::size_t>(r / h), r_grid.size() - 2);
  const double t = (r - r_grid[i]) / h;
  const double t2 = t * t;
  const double d00 = 6 * t2 - 6 * t, d10 = 3 * t2 - 4 * t + 1, d01 = -6 * t2 + 6 * t, d11 = 3 * t2 - 2 * t;
  return (d00 * q_values[i] + d01 * q_values[i + 1]) / h + d10 * q_prime[i] + d11 * q_prime[i + 1];
}

double RadialProfile::second_derivative(double r) const {
  r = std::abs(r);
  const double q = value(r);
  if (r < 1e-8) return 0.5 * (q - q * q * q);
  return q - q * q * q - derivative(r) / r;
}

ShotOutcome classify_shot(double q0, double r_max, double h, const ShootingOptions& opts) {
  return integrate(q0, grid_count(r_max, h), h, opts, false).outcome;
}

namespace {
// Shots are classified on a longer interval than the stored profile so that the
// sign of the unstable mode is settled before the bracket is declared.
double shooting_radius(double r_max) { return std::max(r_max, 25.0); }
}  // namespace

RadialProfile solve_ground_state(double tol, double r_max, double h, const ShootingOptions& opts) {
  require(tol > 0.0 && tol <= 1e-8, ErrorCode::invalid_argument, "tol must lie in (0, 1e-8]");
  require(r_max >= 15.0, ErrorCode::invalid_argument, "r_max must be >= 15");
  require(h > 0.0 && h <= 1e-2, ErrorCode::invalid_argument, "h must lie in (0, 1e-2]");
  const std::size_t n = grid_count(r_max, h);
  const double r_shoot = shooting_radius(r_max);

  double lo = opts.q_low, hi = opts.q_high;
  const bool lo_over = overshoots(classify_shot(lo, r_shoot, h, opts));
  const bool hi_over = overshoots(classify_shot(hi, r_shoot, h, opts));
  if (lo_over == hi_over) {
    throw Error(ErrorCode::bracket_not_found, "amplitudes " + std::to_string(lo) + " and " + std::to_string(hi) +
                                                  " give the same shooting outcome");
  }
  if (lo_over) std::swap(lo, hi);  // lo undershoots, hi overshoots

  // Bisect to the last representable midpoint; the bracket then sits well inside tol.
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (overshoots(classify_shot(mid, r_shoot, h, opts)) ? hi : lo) = mid;
  }
  require(std::abs(hi - lo) <= tol, ErrorCode::non_convergence, "bisection bracket wider than tol");

  const Shot a = integrate(lo, n, h, opts, true);
  const Shot b = integrate(hi, n, h, opts, true);

  // The two shots agree until the unstable growing mode separates them; past that
  // point the decaying solution is continued by its linear asymptote A K0(r).
  std::size_t junction = std::min(a.event_index, b.event_index);
  for (std::size_t i = 1; i < junction && i <= n; ++i) {
    const double qa = a.q[i], qb = b.q[i];
    if (std::abs(qa - qb) > 1e-7 * std::abs(0.5 * (qa + qb))) {
      junction = i;
      break;
    }
  }
  const auto back_off = static_cast<std::size_t>(std::lround(0.5 / h));
  junction = junction > back_off + 1 ? junction - back_off : 1;

  RadialProfile p;
  p.h = h;
  p.q0 = 0.5 * (lo + hi);
  p.r_grid.resize(n + 1);
  p.q_values.resize(n + 1);
  p.q_prime.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i) p.r_grid[i] = static_cast<double>(i) * h;
  for (std::size_t i = 0; i <= std::min(junction, n); ++i) {
    p.q_values[i] = 0.5 * (a.q[i] + b.q[i]);
    p.q_prime[i] = 0.5 * (a.p[i] + b.p[i]);
  }
  if (junction < n) {
    const double rj = p.r_grid[junction];
    const double amp = p.q_values[junction] / std::cyl_bessel_k(0.0, rj);
    for (std::size_t i = junction + 1; i <= n; ++i) {
      const double r = p.r_grid[i];
      p.q_values[i] = amp * std::cyl_bessel_k(0.0, r);
      p.q_prime[i] = -amp * std::cyl_bessel_k(1.0, r);
    }
  }

  const ProfileCheck check = check_profile(p);
  if (!check.ode_residual_ok) {
    std::ostringstream msg;
    msg << "profile ODE residual " << check.max_ode_residual << " at r = " << check.worst_radius << " exceeds 1e-6";
    throw Error(ErrorCode::non_convergence, msg.str());
  }
  return p;
}

ProfileCheck check_profile(const RadialProfile& p) {
  ProfileCheck c;
  const std::size_t n = p.r_grid.size();
  require(n >= 3, ErrorCode::invalid_argument, "profile too short");
  c.decreasing = true;
  for (std::size_t i = 1; i < n; ++i) {
    if (!(p.q_values[i] < p.q_values[i - 1])) {
      c.decreasing = false;
      break;
    }
  }
  c.far_field = p.q_values.back() <= 1e-7;
  double worst = 0.0;
  for (std::size_t i = 1; i + 2 < n; ++i) {
    const double r = p.r_grid[i];
    if (r > p.r_max() - 1.0) break;
    // Fourth-order centred difference of Q'; Q' is odd, so Q'(-r) = -Q'(r) near the origin.
    const double pm2 = i >= 2 ? p.q_prime[i - 2] : -p.q_prime[2 - i];
    const double qpp = (-p.q_prime[i + 2] + 8.0 * p.q_prime[i + 1] - 8.0 * p.q_prime[i - 1] + pm2) / (12.0 * p.h);
    const double q = p.q_values[i];
    const double res = qpp + p.q_prime[i] / r + q * q * q - q;
    if (std::abs(res) > worst) {
      worst = std::abs(res);
      c.worst_radius = r;
    }
  }
  c.max_ode_residual = worst;
  c.ode_residual_ok = worst <= 1e-6;
  return c;
}

NormReport radial_norms(const RadialProfile& p) {
  const std::size_t n = p.r_grid.size();
  double m = 0, g = 0, l4 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = (i == 0 || i + 1 == n) ? 0.5 : 1.0;
    const double r = p.r_grid[i];
    const double q2 = p.q_values[i] * p.q_values[i];
    m += w * r * q2;
    g += w * r * p.q_prime[i] * p.q_prime[i];
    l4 += w * r * q2 * q2;
  }
  const double scale = 2.0 * std::numbers::pi * p.h;
  NormReport rep;
  rep.mass_sq = scale * m;
  rep.grad_sq = scale * g;
  rep.l4_fourth = scale * l4;
  rep.energy = 0.5 * rep.grad_sq - 0.25 * rep.l4_fourth;
  rep.gn_constant = 2.0 / rep.mass_sq;
  return rep;
}

GnCheck gn_check(const Field2D& w, double c4) {
  GnCheck out;
  out.lhs = l4_fourth(w);
  out.rhs = c4 * mass(w) * grad_norm_sq(w);
  out.holds = out.lhs <= out.rhs * (1.0 + 1e-6);
  return out;
}

Field2D sample_profile(const RadialProfile& p, const GridPtr& grid, Point center) {
  return Field2D::sample(grid, [&](double x, double y) { return p.value(std::hypot(x - center.x, y - center.y)); });
}

void write_profile(const RadialProfile& p, const std::string& path) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorCode::io_error, "cannot open " + path);
  os << "# r Q dQ\n" << std::setprecision(17);
  for (std::size_t i = 0; i < p.r_grid.size(); ++i) {
    os << p.r_grid[i] << ' ' << p.q_values[i] << ' ' << p.q_prime[i] << '\n';
  }
}

RadialProfile read_profile(const std::string& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorCode::io_error, "cannot open " + path);
  RadialProfile p;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double r, q, dq;
    if (!(ls >> r >> q >> dq)) {
      throw Error(ErrorCode::io_error, path + ":" + std::to_string(lineno) + ": expected three columns");
    }
    p.r_grid.push_back(r);
    p.q_values.push_back(q);
    p.q_prime.push_back(dq);
  }
  require(p.r_grid.size() >= 3, ErrorCode::io_error, path + ": profile has fewer than three rows");
  p.h = p.r_grid[1] - p.r_grid[0];
  p.q0 = p.q_values[0];
  return p;
}

}  // namespace blowup
