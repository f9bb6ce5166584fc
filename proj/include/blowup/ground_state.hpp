#pragma once

#include <string>
#include <vector>

#include "blowup/grid.hpp"

namespace blowup {

/// Ground state Q of Delta Q + Q^3 = Q sampled on a uniform radial grid.
struct RadialProfile {
  std::vector<double> r_grid;
  std::vector<double> q_values;
  std::vector<double> q_prime;
  double h = 0.0;
  double q0 = 0.0;

  double r_max() const { return r_grid.empty() ? 0.0 : r_grid.back(); }

  /// Cubic Hermite interpolation of Q; zero beyond r_max.
  double value(double r) const;
  double derivative(double r) const;
  /// Q'' from the profile equation, Q'' = Q - Q^3 - Q'/r (2 Q''(0) limit at the origin).
  double second_derivative(double r) const;
};

struct NormReport {
  double mass_sq = 0.0;    // ||Q||_2^2
  double grad_sq = 0.0;    // ||grad Q||_2^2
  double l4_fourth = 0.0;  // ||Q||_4^4
  double energy = 0.0;
  double gn_constant = 0.0;  // 2 / ||Q||_2^2
};

struct ProfileCheck {
  bool decreasing = false;
  bool far_field = false;  // q_values.back() <= 1e-7
  double max_ode_residual = 0.0;
  double worst_radius = 0.0;
  bool ode_residual_ok = false;
  bool ok() const { return decreasing && far_field && ode_residual_ok; }
};

struct ShootingOptions {
  double q_low = 1.0;
  double q_high = 4.0;
  double divergence_level = 10.0;
};

/// Outcome of one shooting integration.
enum class ShotOutcome { crossing, turning_back, divergence, none };
ShotOutcome classify_shot(double q0, double r_max, double h, const ShootingOptions& opts = {});

/// RK4 shooting with bisection on Q(0). Requires tol <= 1e-8, r_max >= 15, h <= 1e-2.
RadialProfile solve_ground_state(double tol, double r_max, double h, const ShootingOptions& opts = {});

ProfileCheck check_profile(const RadialProfile& p);

/// Norms by composite trapezoid in r with weight 2 pi r.
NormReport radial_norms(const RadialProfile& p);

struct GnCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

/// ||w||_4^4 <= c4 ||w||_2^2 ||grad w||_2^2 with relative slack 1e-6.
GnCheck gn_check(const Field2D& w, double c4);

/// Q(|x - center|) sampled on the grid interior.
Field2D sample_profile(const RadialProfile& p, const GridPtr& grid, Point center = {});

void write_profile(const RadialProfile& p, const std::string& path);
RadialProfile read_profile(const std::string& path);

}  // namespace blowup
