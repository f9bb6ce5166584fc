// Acceptance run: one PASS/FAIL line per criterion. Exit 0 iff the failing set equals --known-failures.
#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>

#include "blowup/diagnostics.hpp"
#include "blowup/error.hpp"
#include "blowup/exact_solutions.hpp"
#include "blowup/linearized_operator.hpp"
#include "blowup/modulation.hpp"
#include "blowup/nls_solver.hpp"
#include "blowup/runner.hpp"

using namespace blowup;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  // record one condition; the detail line lists every measured value with its bound
  void need(const char* what, double value, const char* rel, double bound) {
    bool ok = false;
    const std::string r = rel;
    if (r == "<=") ok = value <= bound;
    else if (r == ">=") ok = value >= bound;
    else if (r == "<") ok = value < bound;
    else if (r == ">") ok = value > bound;
    else if (r == "==") ok = value == bound;
    ok = ok && std::isfinite(value);
    pass = pass && ok;
    detail << (detail.tellp() > 0 ? "; " : "") << what << " = " << value << " " << rel << " " << bound << (ok ? "" : " [x]");
  }
};

const RadialProfile& ground_state() {
  static const RadialProfile p = solve_ground_state(1e-10, 20.0, 1e-3);
  return p;
}

double mass_q() { return radial_norms(ground_state()).mass_sq; }

fs::path g_workdir;
fs::path g_source;

RunReport run_config(const std::string& name) {
  RunConfig cfg = RunConfig::load((g_source / "configs" / (name + ".cfg")).string());
  cfg.out_dir = (g_workdir / name).string();
  return run(cfg);
}

double check_value(const RunReport& r, const std::string& name) {
  for (const Check& c : r.checks)
    if (c.name == name) return c.value;
  return std::nan("");
}

// ---------------------------------------------------------------------------------------------

void c1(Outcome& o) {
  const NormReport n = radial_norms(ground_state());
  o.need("|grad Q|^2/|Q|^2 - 1", std::abs(n.grad_sq / n.mass_sq - 1.0), "<=", 1e-4);
  o.need("|Q|_4^4/|Q|^2 - 2", std::abs(n.l4_fourth / n.mass_sq - 2.0), "<=", 1e-4);
  o.need("|E(Q)|/|Q|^2", std::abs(n.energy) / n.mass_sq, "<=", 1e-6);
}

void c2(Outcome& o) {
  const SpectrumReport s = compute_spectrum(ground_state(), 4, 5, 5e-3, 15.0);
  o.need("first eigenvalue", s.modes[0].eigenvalues[0], "<", 0.0);
  // the second eigenvalue of L overall is the lowest one above the negative direction
  std::vector<double> all;
  for (const auto& m : s.modes)
    for (double e : m.eigenvalues) all.push_back(e);
  std::sort(all.begin(), all.end());
  o.need("|second eigenvalue|", std::abs(all[1]), "<=", 1e-3);
  o.need("kernel dimension", s.kernel_dimension_estimate, "==", 2);
  const CoercivityResult c = constrained_coercivity(ground_state());
  o.need("coercivity I", c.I, ">=", 0.05);
}

void c3(Outcome& o) {
  const MarisReport r = maris_hypothesis_check(ground_state(), 200, 400);
  o.need("sign violations", static_cast<double>(r.violations.size()), "==", 0.0);
  o.need("|int G(Q)|/|Q|^2", std::abs(r.integral_G_rel), "<=", 1e-4);
  o.need("Q(0) - sqrt2", r.q0_margin, ">", 0.0);
}

void c4(Outcome& o) {
  const BlowupFamilyParams par{1.0, 1.0, {}};
  const GridPtr g1 = make_grid(DomainSpec::rectangle(18.0, 18.0, {-9.0, -9.0}), 1.0 / 16.0);
  const GridPtr g2 = make_grid(DomainSpec::rectangle(18.0, 18.0, {-9.0, -9.0}), 1.0 / 32.0);
  double mdev = 0.0, gdev = 0.0;
  for (double t : {0.0, 0.25, 0.5}) {
    const Field2D u = explicit_blowup(par, ground_state(), t, g2);
    mdev = std::max(mdev, std::abs(mass(u) / mass_q() - 1.0));
    const double E = family_invariants(par, ground_state(), t).energy;
    gdev = std::max(gdev, std::abs(weighted_mass(u, Weight::quadratic()) / (8.0 * E * (1 - t) * (1 - t)) - 1.0));
  }
  const auto rule = explicit_blowup_rule(par, ground_state());
  const double r1 = std::sqrt(mass(pde_residual(rule, 0.5, 1e-5, g1)));
  const double r2 = std::sqrt(mass(pde_residual(rule, 0.5, 1e-5, g2)));
  o.need("mass deviation", mdev, "<=", 1e-3);
  o.need("PDE residual order", std::log2(r1 / r2), ">=", 1.8);
  o.need("|g/(8E(T-t)^2) - 1|", gdev, "<=", 5e-2);
}

void c5(Outcome& o) {
  const BlowupFamilyParams par{0.1, 2.0, {}};
  const double t_end = 0.025;
  const DiagnosticsContext ctx = DiagnosticsContext::from_profile(ground_state());
  double err[2] = {}, mdrift = 0.0, edrift = 0.0;
  int k = 0;
  for (double h : {1.0 / 64.0, 1.0 / 128.0}) {
    const GridPtr g = make_grid(DomainSpec::rectangle(6.0, 6.0, {-3.0, -3.0}), h);
    SolverConfig cfg;
    cfg.dt0 = 0.005;
    cfg.t_end = t_end;
    cfg.series_stride = 20;
    const Trajectory tr = evolve(explicit_blowup(par, ground_state(), 0.0, g), cfg, ctx);
    if (tr.termination != Termination::horizon) throw Error(ErrorCode::under_resolved, "run stopped: " + tr.message);
    err[k++] = std::sqrt(mass(tr.snapshots.back() - explicit_blowup(par, ground_state(), t_end, g)) /
                         mass_q());
    const double m0 = tr.series.front().mass, e0 = tr.series.front().energy;
    for (const auto& r : tr.series) {
      mdrift = std::max(mdrift, std::abs(r.mass - m0) / m0 / t_end);
      edrift = std::max(edrift, std::abs(r.energy - e0) / std::abs(e0));
    }
  }
  o.need("mass drift per unit time", mdrift, "<=", 1e-10);
  o.need("energy drift", edrift, "<=", 1e-6);
  o.need("L2 error at h=1/128", err[1], "<=", 5e-3);
  o.need("convergence order", std::log2(err[0] / err[1]), ">=", 1.8);
}

void c6(Outcome& o) {
  const StarSuiteResult r = star_property_suite(1, 200);
  o.need("cases", r.cases, "==", 200);
  o.need("violations", r.violations, "==", 0);
  o.need("min slack", r.min_slack, ">=", 0.0);
}

void c7(Outcome& o) {
  const RunReport r = run_config("sector_virial");
  o.need("|g''-16E|/16|E|", check_value(r, "virial_rel"), "<=", 2e-2);
  o.need("flux/16|E|", check_value(r, "boundary_flux_rel"), "<=", 1e-6);
  o.need("x.nu = 0 on straight edges", check_value(r, "sector_geometry"), "==", 1.0);
  o.need("virial points", check_value(r, "virial_points"), ">=", 3.0);
}

const RunReport& rate_run() {
  static const RunReport r = run_config("rate_bound");
  return r;
}

void c8(Outcome& o) {
  // analytic: the family's gradient and energy in closed form, T known
  double analytic = INFINITY;
  for (double alpha : {0.5, 1.0, 2.0}) {
    const BlowupFamilyParams par{1.0, alpha, {}};
    DiagnosticsSeries s;
    for (int i = 0; i < 200; ++i) {
      DiagnosticsRow row;
      row.t = 0.999 * i / 199.0;
      const FamilyInvariants inv = family_invariants(par, ground_state(), row.t);
      row.energy = inv.energy;
      row.grad_norm = std::sqrt(inv.grad_sq);
      s.push_back(row);
    }
    analytic = std::min(analytic, rate_bound_monitor(s, par.T, mass_q()).min_margin / mass_q());
  }
  o.need("analytic margin/|Q|^2", analytic, ">=", -1e-2);
  const RunReport& r = rate_run();
  o.need("simulated T fit valid", check_value(r, "T_fit_valid"), "==", 1.0);
  o.need("simulated margin/|Q|^2", check_value(r, "rate_margin_rel"), ">=", -1e-2);
}

void c9(Outcome& o) {
  // analytic family over >= 10x growth in lambda (complex residual; the modulus residual of this
  // family is identically zero up to lattice error, so its band is not informative)
  std::vector<ModulationFit> fits;
  for (double s = 0.6; s >= 0.04; s *= 0.75) {
    const double L = 13.0 * s;
    const GridPtr g = make_grid(DomainSpec::rectangle(2 * L, 2 * L, {-L, -L}), s / 16.0);
    fits.push_back(fit_modulation(explicit_blowup({0.6, 1.0, {}}, ground_state(), 0.6 - s, g), ground_state()));
  }
  const DecayReport d = residual_decay_check(fits, false);
  o.need("analytic lambda growth", d.lambda_growth, ">=", 10.0);
  o.need("analytic lambda|R|_H1 band", d.band_ratio, "<=", 2.0);
  o.need("analytic rho band", equivir_check(fits).band_ratio, "<=", 10.0);
  o.need("analytic |x_mom - x_cen| lambda^2", momentum_centroid_gap(fits), "<=", 1.0);
  const RunReport& r = rate_run();
  o.need("simulated sup lambda|R~|_H1", check_value(r, "sup_lambda_residual_finite"), "<", 1e300);
  o.need("simulated rho band", check_value(r, "rho_band"), "<=", 10.0);
  o.need("simulated |x_mom - x_cen| lambda^2", r.json.value("momentum_centroid_gap", NAN), "<=", 1.0);
}

void c10(Outcome& o) {
  const RunReport r = run_config("global_existence");
  o.need("initial mass/|Q|^2", r.json.at("mass_initial").get<double>() / mass_q(), "<", 1.0);
  o.need("sup lambda", check_value(r, "sup_lambda"), "<", 5.0);
  o.need("reached t_end", check_value(r, "reached_t_end"), ">=", 1.0 - 1e-12);
  o.need("diverged", check_value(r, "not_diverged"), "==", 0.0);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria 1-10"};
  std::vector<int> known;
  std::string workdir = "acceptance_runs";
  std::vector<int> only;
  app.add_option("--known-failures", known, "criteria expected to fail")->delimiter(',');
  app.add_option("--workdir", workdir, "directory for run outputs");
  app.add_option("--only", only, "run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  g_workdir = fs::absolute(workdir);
  g_source = BLOWUP_SOURCE_DIR;
  fs::create_directories(g_workdir);

  const std::vector<std::pair<const char*, void (*)(Outcome&)>> criteria = {
      {"ground-state identities", c1},  {"spectral program", c2},       {"Maris hypotheses", c3},
      {"exact-family fidelity", c4},    {"solver conservation", c5},    {"inequality (*) suite", c6},
      {"virial identity on sectors", c7}, {"rate lower bound", c8},     {"modulation decay and equivalence", c9},
      {"global-existence contrast", c10}};

  std::set<int> failed;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << (o.detail.tellp() > 0 ? "; " : "") << "error: " << e.what();
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) failed.insert(id);
    const bool expected = std::find(known.begin(), known.end(), id) != known.end();
    std::printf("%s criterion %d (%s) [%.1fs]%s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, sec,
                !o.pass && expected ? " (known failure)" : "", o.detail.str().c_str());
    std::fflush(stdout);
  }
  std::set<int> expected;
  for (int k : known)
    if (only.empty() || std::find(only.begin(), only.end(), k) != only.end()) expected.insert(k);
  if (failed != expected) {
    std::printf("unexpected outcome: failing set differs from --known-failures\n");
    return 1;
  }
  return 0;
}
