#pragma once

#include <functional>

#include "blowup/ground_state.hpp"
#include "blowup/grid.hpp"

namespace blowup {

/// Explicit blow-up family
///   u(t,x) = e^{i/(alpha^2 (T-t))} / (alpha (T-t)) * e^{-i|x-x0|^2/(4(T-t))} * Q(|x-x0| / (alpha (T-t))).
/// alpha = 1 is the classical pseudo-conformal image of e^{it}Q.
struct BlowupFamilyParams {
  double T = 1.0;
  double alpha = 1.0;
  Point x0{};

  void validate() const;
};

/// Space-time evaluation rule u(t, x).
using SpaceTimeField = std::function<cplx(double t, Point x)>;

/// e^{it} Q(|x - center|).
SpaceTimeField stationary_rule(const RadialProfile& p, Point center = {});
Field2D stationary(const RadialProfile& p, double t, const GridPtr& grid, Point center = {});

/// (1/t) e^{i|x|^2/(4t)} u(-1/t, x/t); evaluating at t = 0 throws invalid-argument.
SpaceTimeField pseudo_conformal(SpaceTimeField u);

SpaceTimeField explicit_blowup_rule(const BlowupFamilyParams& params, const RadialProfile& p);
/// Sampled family member; under-resolved unless h <= alpha (T - t) / 8.
Field2D explicit_blowup(const BlowupFamilyParams& params, const RadialProfile& p, double t, const GridPtr& grid);

/// Closed forms for the family on the whole plane.
struct FamilyInvariants {
  double mass = 0.0;         // ||Q||^2
  double energy = 0.0;       // alpha^2 int |y|^2 Q^2 / 8
  double grad_sq = 0.0;      // ||grad Q||^2 / s^2 + 2E at the requested time
  double variance = 0.0;     // int |u|^2 |x - x0|^2 = 8 E (T - t)^2
};
FamilyInvariants family_invariants(const BlowupFamilyParams& params, const RadialProfile& p, double t);

/// int |y|^2 Q(y)^2 dy by radial trapezoid.
double second_moment_Q(const RadialProfile& p);

/// 1 on [0, inner], 0 on [outer, inf), quintic C^2 transition.
double bump(double r, double inner, double outer);

/// psi * explicit_blowup(t = 0). Throws geometry-violation unless the outer ball about x0 lies in the domain.
Field2D cutoff_profile(const BlowupFamilyParams& params, const RadialProfile& p, double inner, double outer,
                       const GridPtr& grid);

/// Discrete residual i u_t + Delta_h u + |u|^2 u of a space-time rule at time t,
/// with u_t from a centred difference of step dt.
Field2D pde_residual(const SpaceTimeField& u, double t, double dt, const GridPtr& grid);

}  // namespace blowup
