#pragma once
// Shared fixtures and independent oracles for the unit tests.

#include <cmath>
#include <random>
#include <vector>

#include "blowup/ground_state.hpp"
#include "blowup/grid.hpp"

namespace test {

using namespace blowup;

// Library ground state at the reference resolution, solved once per binary.
inline const RadialProfile& Q() {
  static const RadialProfile p = solve_ground_state(1e-10, 20.0, 1e-3);
  return p;
}

// Independent shooting oracle: y'' = y - y^3 - y'/r from the series start
// y(r0) = a + (a - a^3) r0^2 / 4, classic RK4 written out here, bisection on a.
struct OracleProfile {
  double a = 0.0;
  std::vector<double> r, y, dy;
};

inline int oracle_shot(double a, double h, double r_end, OracleProfile* keep = nullptr) {
  double r = h, y = a + (a - a * a * a) * h * h / 4.0, v = (a - a * a * a) * h / 2.0;
  auto f = [](double r_, double y_, double v_, double& dy_, double& dv_) {
    dy_ = v_;
    dv_ = y_ - y_ * y_ * y_ - v_ / r_;
  };
  if (keep) {
    keep->r = {0.0, r};
    keep->y = {a, y};
    keep->dy = {0.0, v};
  }
  while (r < r_end) {
    double k1y, k1v, k2y, k2v, k3y, k3v, k4y, k4v;
    f(r, y, v, k1y, k1v);
    f(r + h / 2, y + h / 2 * k1y, v + h / 2 * k1v, k2y, k2v);
    f(r + h / 2, y + h / 2 * k2y, v + h / 2 * k2v, k3y, k3v);
    f(r + h, y + h * k3y, v + h * k3v, k4y, k4v);
    y += h / 6 * (k1y + 2 * k2y + 2 * k3y + k4y);
    v += h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
    r += h;
    if (keep) {
      keep->r.push_back(r);
      keep->y.push_back(y);
      keep->dy.push_back(v);
    }
    if (y < 0.0) return +1;              // crosses zero: a too large
    if (y > 10.0 || v > 0.0) return -1;  // turns back up: a too small
  }
  return 0;
}

inline double oracle_q0(double h = 1e-4, double tol = 1e-12) {
  double lo = 1.0, hi = 4.0;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (oracle_shot(mid, h, 14.0) < 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// 2 pi int f(r) r dr by composite Simpson on a uniform grid starting at 0.
inline double radial_simpson(const std::vector<double>& f, double h) {
  const std::size_t n = (f.size() - 1) / 2 * 2;
  double s = 0.0;
  for (std::size_t i = 0; i + 2 <= n; i += 2) {
    const double r0 = i * h, r1 = (i + 1) * h, r2 = (i + 2) * h;
    s += h / 3.0 * (f[i] * r0 + 4.0 * f[i + 1] * r1 + f[i + 2] * r2);
  }
  return 2.0 * M_PI * s;
}

// Smooth random Dirichlet-compatible field: Gaussian sum with random phases, widths >= min_width.
inline Field2D random_gaussians(const GridPtr& g, std::mt19937_64& rng, Point lo, Point hi, double min_width,
                                int max_terms = 3) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const int n = 1 + static_cast<int>(U(rng) * max_terms) % max_terms;
  struct Term {
    Point c;
    double w;
    cplx a;
    Point k;
  };
  std::vector<Term> terms;
  for (int i = 0; i < n; ++i)
    terms.push_back({{lo.x + (hi.x - lo.x) * U(rng), lo.y + (hi.y - lo.y) * U(rng)},
                     min_width * (1.0 + U(rng)),
                     std::polar(0.2 + U(rng), 2 * M_PI * U(rng)),
                     {-1.5 + 3 * U(rng), -1.5 + 3 * U(rng)}});
  return Field2D::sample(g, [&](double x, double y) {
    cplx s = 0.0;
    for (const auto& t : terms) {
      const double dx = x - t.c.x, dy = y - t.c.y;
      s += t.a * std::exp(-(dx * dx + dy * dy) / (2 * t.w * t.w)) * std::polar(1.0, t.k.x * x + t.k.y * y);
    }
    return s;
  });
}

inline double rel_l2(const Field2D& a, const Field2D& b) { return std::sqrt(mass(a - b) / mass(b)); }

}  // namespace test
