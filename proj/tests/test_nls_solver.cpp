#include <doctest.h>

#include "blowup/error.hpp"
#include "blowup/exact_solutions.hpp"
#include "blowup/nls_solver.hpp"
#include "support.hpp"

using namespace blowup;
using test::Q;

namespace {

const DiagnosticsContext& ctx() {
  static const DiagnosticsContext c = DiagnosticsContext::from_profile(Q());
  return c;
}

double family_error(double h, double c, double* energy_drift = nullptr) {
  const BlowupFamilyParams par{0.2, 2.0, {}};
  const double t_end = 0.05;
  const GridPtr g = make_grid(DomainSpec::rectangle(8.0, 8.0, {-4.0, -4.0}), h);
  SolverConfig cfg;
  cfg.dt0 = c;
  cfg.t_end = t_end;
  cfg.series_stride = 10;
  const Trajectory tr = evolve(explicit_blowup(par, Q(), 0.0, g), cfg, ctx());
  REQUIRE(tr.termination == Termination::horizon);
  if (energy_drift)
    *energy_drift = std::abs(tr.series.back().energy - tr.series.front().energy) / std::abs(tr.series.front().energy);
  return test::rel_l2(tr.snapshots.back(), explicit_blowup(par, Q(), t_end, g));
}

}  // namespace

TEST_CASE("single steps") {
  const GridPtr g = make_grid(DomainSpec::disc(4.0), 1.0 / 16.0);
  SUBCASE("zero stays zero") { CHECK(mass(step(Field2D(g), 1e-2)) == 0.0); }
  SUBCASE("each step conserves mass to rounding") {
    std::mt19937_64 rng(2);
    Field2D u = test::random_gaussians(g, rng, {-1, -1}, {1, 1}, 0.4);
    u *= std::sqrt(0.7 * radial_norms(Q()).mass_sq / mass(u));
    NlsSolver s(u, {});
    const double m0 = mass(u);
    for (int i = 0; i < 20; ++i) {
      s.step(1e-3);
      CHECK(std::abs(mass(s.state()) - m0) <= 1e-12 * m0);
    }
    CHECK(s.time() == doctest::Approx(0.02));
  }
}

TEST_CASE("ground state is stationary up to phase") {
  const GridPtr g = make_grid(DomainSpec::disc(8.0), 1.0 / 16.0);
  const Field2D q = sample_profile(Q(), g);
  SolverConfig cfg;
  cfg.dt_policy = DtPolicy::fixed;
  cfg.dt0 = 1e-3;
  cfg.t_end = 1.0;
  cfg.series_stride = 100;
  const Trajectory tr = evolve(q, cfg, ctx());
  CHECK(tr.termination == Termination::horizon);
  CHECK(tr.steps == doctest::Approx(1000).epsilon(1e-3));
  // the sampled Q is not the lattice ground state; |u| breathes by O(h^2) around it
  const Field2D m = modulus(tr.snapshots.back());
  CHECK(test::rel_l2(m, q) <= 5e-3);
  CHECK(tr.max_step_mass_change <= 1e-12);
}

TEST_CASE("second-order convergence to the explicit family") {
  double dE = 0.0;
  const double e1 = family_error(1.0 / 32.0, 0.02);
  const double e2 = family_error(1.0 / 64.0, 0.02, &dE);
  MESSAGE("errors " << e1 << " " << e2);
  CHECK(std::log2(e1 / e2) >= 1.8);
  CHECK(e2 <= 2e-2);
}

TEST_CASE("energy drift shrinks with the step constant") {
  // resolved window of the same family on a coarse lattice
  double d1 = 0.0, d2 = 0.0;
  family_error(1.0 / 32.0, 0.02, &d1);
  family_error(1.0 / 32.0, 0.01, &d2);
  MESSAGE("drifts " << d1 << " " << d2);
  CHECK(d1 / d2 == doctest::Approx(4.0).epsilon(0.25));  // second order in time
  CHECK(d1 <= 1e-4);
}

TEST_CASE("cutoff blow-up stops at the resolution limit") {
  const BlowupFamilyParams par{1.0, 1.0, {}};
  const GridPtr g = make_grid(DomainSpec::disc(6.0), 1.0 / 32.0);
  SolverConfig cfg;
  cfg.dt0 = 0.2;
  cfg.t_end = 2.0;
  cfg.series_stride = 20;
  const Field2D u0 = cutoff_profile(par, Q(), 4.5, 5.5, g);
  const Trajectory tr = evolve(u0, cfg, ctx());
  CHECK(tr.termination == Termination::under_resolved);
  CHECK(tr.series.back().lambda >= 5.0 * tr.series.front().lambda);
  CHECK(tr.series.back().lambda * g->h() > cfg.max_lambda_h * 0.9);
}

TEST_CASE("subcritical data reach the horizon") {
  const GridPtr g = make_grid(DomainSpec::disc(6.0), 1.0 / 16.0);
  Field2D u0 = Field2D::sample(g, [](double x, double y) { return 1.5 * std::exp(-(x * x + y * y)); });
  REQUIRE(mass(u0) < radial_norms(Q()).mass_sq);
  SolverConfig cfg;
  cfg.dt0 = 0.05;
  cfg.t_end = 0.5;
  const Trajectory tr = evolve(u0, cfg, ctx());
  CHECK(tr.termination == Termination::horizon);
  CHECK(tr.series.back().t == doctest::Approx(0.5));
}

TEST_CASE("divergence is reported, not thrown") {
  const GridPtr g = make_grid(DomainSpec::disc(4.0), 1.0 / 16.0);
  SolverConfig cfg;
  cfg.dt_policy = DtPolicy::fixed;
  cfg.dt0 = 50.0;
  cfg.t_end = 500.0;
  cfg.max_linear_iterations = 5;
  const Trajectory tr = evolve(sample_profile(Q(), g), cfg, ctx());
  CHECK(tr.termination == Termination::diverged);
  CHECK_FALSE(tr.message.empty());
  for (const DiagnosticsRow& r : tr.series) CHECK(std::isfinite(r.mass));
}

TEST_CASE("solver configuration validation") {
  auto bad = [](auto mutate) {
    SolverConfig c;
    mutate(c);
    return c;
  };
  CHECK_THROWS_AS(bad([](SolverConfig& c) { c.dt0 = 0.0; }).validate(), Error);
  CHECK_THROWS_AS(bad([](SolverConfig& c) { c.t_end = -1.0; }).validate(), Error);
  CHECK_THROWS_AS(bad([](SolverConfig& c) { c.max_lambda_h = 0.0; }).validate(), Error);
  CHECK_THROWS_AS(bad([](SolverConfig& c) { c.relax_tol = 0.0; }).validate(), Error);
  CHECK_THROWS_AS(bad([](SolverConfig& c) { c.series_stride = 0; }).validate(), Error);
  CHECK_NOTHROW(SolverConfig{}.validate());
}
