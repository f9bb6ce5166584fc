#include "blowup/exact_solutions.hpp"

#include <cmath>

#include "blowup/error.hpp"

namespace blowup {

void BlowupFamilyParams::validate() const {
  require(T > 0.0, ErrorCode::invalid_argument, "blow-up time must be positive");
  require(alpha > 0.0, ErrorCode::invalid_argument, "alpha must be positive");
}

SpaceTimeField stationary_rule(const RadialProfile& p, Point center) {
  return [&p, center](double t, Point x) { return std::polar(p.value(norm(x - center)), t); };
}

Field2D stationary(const RadialProfile& p, double t, const GridPtr& grid, Point center) {
  const auto rule = stationary_rule(p, center);
  return Field2D::sample(grid, [&](double x, double y) { return rule(t, {x, y}); });
}

SpaceTimeField pseudo_conformal(SpaceTimeField u) {
  return [u = std::move(u)](double t, Point x) -> cplx {
    if (t == 0.0) throw Error(ErrorCode::invalid_argument, "pseudo-conformal transform is singular at t = 0");
    const double r2 = dot(x, x);
    return std::polar(1.0 / t, r2 / (4.0 * t)) * u(-1.0 / t, (1.0 / t) * x);
  };
}

SpaceTimeField explicit_blowup_rule(const BlowupFamilyParams& params, const RadialProfile& p) {
  params.validate();
  return [params, &p](double t, Point x) -> cplx {
    const double tau = params.T - t;
    if (!(tau > 0.0)) throw Error(ErrorCode::invalid_argument, "family evaluated at or after T");
    const double s = params.alpha * tau;
    const Point d = x - params.x0;
    const double phase = 1.0 / (params.alpha * params.alpha * tau) - dot(d, d) / (4.0 * tau);
    return std::polar(p.value(norm(d) / s) / s, phase);
  };
}

Field2D explicit_blowup(const BlowupFamilyParams& params, const RadialProfile& p, double t, const GridPtr& grid) {
  params.validate();
  require(t < params.T, ErrorCode::invalid_argument, "t must be before T");
  const double width = params.alpha * (params.T - t);
  require(grid->h() <= width / 8.0 * (1.0 + 1e-12), ErrorCode::under_resolved,
          "grid does not resolve the family width alpha (T - t)");
  const auto rule = explicit_blowup_rule(params, p);
  return Field2D::sample(grid, [&](double x, double y) { return rule(t, {x, y}); });
}

double second_moment_Q(const RadialProfile& p) {
  double s = 0.0;
  const std::size_t n = p.r_grid.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double r = p.r_grid[i];
    const double w = (i == 0 || i + 1 == n) ? 0.5 : 1.0;
    s += w * r * r * r * p.q_values[i] * p.q_values[i];
  }
  return 2.0 * M_PI * p.h * s;
}

FamilyInvariants family_invariants(const BlowupFamilyParams& params, const RadialProfile& p, double t) {
  params.validate();
  const NormReport nr = radial_norms(p);
  FamilyInvariants out;
  out.mass = nr.mass_sq;
  out.energy = params.alpha * params.alpha * second_moment_Q(p) / 8.0;
  const double s = params.alpha * (params.T - t);
  out.grad_sq = nr.grad_sq / (s * s) + 2.0 * out.energy;
  out.variance = 8.0 * out.energy * (params.T - t) * (params.T - t);
  return out;
}

double bump(double r, double inner, double outer) {
  if (r <= inner) return 1.0;
  if (r >= outer) return 0.0;
  const double x = (r - inner) / (outer - inner);
  return 1.0 - x * x * x * (10.0 - 15.0 * x + 6.0 * x * x);
}

Field2D cutoff_profile(const BlowupFamilyParams& params, const RadialProfile& p, double inner, double outer,
                       const GridPtr& grid) {
  params.validate();
  require(0.0 < inner && inner < outer, ErrorCode::invalid_argument, "need 0 < inner < outer");
  const DomainSpec& dom = grid->domain();
  require(dom.contains(params.x0), ErrorCode::geometry_violation, "x0 is not interior");
  require(dom.boundary_distance(params.x0) >= outer, ErrorCode::geometry_violation,
          "cut-off ball leaves the domain");
  Field2D u = explicit_blowup(params, p, 0.0, grid);
  auto v = u.values();
  for (std::size_t k : grid->interior_nodes()) {
    const Point x = grid->node(k % grid->nx(), k / grid->nx());
    v[k] *= bump(norm(x - params.x0), inner, outer);
  }
  return u;
}

Field2D pde_residual(const SpaceTimeField& u, double t, double dt, const GridPtr& grid) {
  const Field2D u0 = Field2D::sample(grid, [&](double x, double y) { return u(t, {x, y}); });
  const Field2D up = Field2D::sample(grid, [&](double x, double y) { return u(t + dt, {x, y}); });
  const Field2D um = Field2D::sample(grid, [&](double x, double y) { return u(t - dt, {x, y}); });
  Field2D res = laplacian(u0);
  auto r = res.values();
  const cplx I(0.0, 1.0);
  for (std::size_t k : grid->interior_nodes()) {
    const cplx z = u0.at(k);
    r[k] += I * (up.at(k) - um.at(k)) / (2.0 * dt) + std::norm(z) * z;
  }
  return res;
}

}  // namespace blowup
