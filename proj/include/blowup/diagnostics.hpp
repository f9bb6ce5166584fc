#pragma once

#include <string>
#include <vector>

#include "blowup/ground_state.hpp"
#include "blowup/grid.hpp"
#include "blowup/weights.hpp"

namespace blowup {

/// Reference constants and weight choices shared by the per-step diagnostics.
struct DiagnosticsContext {
  double grad_q_sq = 0.0;  // ||grad Q||_2^2
  double mass_q = 0.0;     // ||Q||_2^2
  Point virial_center{};
  double loc_radius = 1.0;  // phi = 1 on B(center, R), 0 beyond 2R
  Weight flux_weight = Weight::quadratic();
  bool boundary_flux = true;

  static DiagnosticsContext from_profile(const RadialProfile& p, Point virial_center = {}, double loc_radius = 1.0);
};

/// One row of series.csv.
struct DiagnosticsRow {
  double t = 0.0;
  double mass = 0.0;
  double energy = 0.0;
  double grad_norm = 0.0;
  double lambda = 0.0;
  double lambda_tilde = 0.0;
  double fx = 0.0;
  double fy = 0.0;
  double virial = 0.0;
  double virial_loc = 0.0;
  double boundary_flux = 0.0;
  double conc_radius_50 = 0.0;
};

using DiagnosticsSeries = std::vector<DiagnosticsRow>;

DiagnosticsRow compute_row(const Field2D& u, double t, const DiagnosticsContext& ctx);

void write_series_csv(const DiagnosticsSeries& s, const std::string& path);
DiagnosticsSeries read_series_csv(const std::string& path);

// Quantities -----------------------------------------------------------------

/// E(u) = 1/2 ||grad u||^2 - 1/4 ||u||_4^4 with the edge-difference Dirichlet form.
double energy(const Field2D& u);

/// int |u|^2 h.
double weighted_mass(const Field2D& u, const Weight& w);

/// f(t) = int |u|^2 x.
Point first_moment(const Field2D& u);

/// -2 int Im(u grad conj(u)) . grad h, in the edge form that is the exact time derivative
/// of sum |u|^2 h h^2 under the semi-discrete flow.
double momentum_derivative(const Field2D& u, const Weight& w);

/// int |u|^2 |grad h|^2 in the matching edge form.
double weighted_gradient_mass(const Field2D& u, const Weight& w);

/// Smallest radius about `center` containing `fraction` of the mass.
double concentration_radius(const Field2D& u, Point center, double fraction = 0.5);

/// -2 oint |du/dnu|^2 dh/dnu.
double boundary_flux(const Field2D& u, const Weight& w);

struct StarResult {
  double lhs = 0.0;
  double rhs = 0.0;
  double energy = 0.0;
  bool holds = false;
};

/// |int Im(v grad conj v) . grad theta| <= (2 E(v) int |v|^2 |grad theta|^2)^{1/2} + 1e-9.
/// Throws supercritical-mass when ||v||^2 > ||Q||^2 (1 + 1e-9)^2.
StarResult cauchy_schwarz_star(const Field2D& v, const Weight& theta, double mass_q);

/// Right side of the localized virial identity for weight h.
struct VirialRhs {
  double sixteen_E = 0.0;
  double kinetic_term = 0.0;     // -int (2|grad u|^2 - |u|^4)(4 - Delta h)
  double bilaplacian_term = 0.0; // -int |u|^2 Delta^2 h
  double hessian_term = 0.0;     // int 4 Re d_i u d_j conj(u) d_ij h - 2 |grad u|^2 Delta h
  double boundary_term = 0.0;    // -2 oint |du/dnu|^2 dh/dnu
  double total() const { return sixteen_E + kinetic_term + bilaplacian_term + hessian_term + boundary_term; }
};
VirialRhs virial_rhs(const Field2D& u, const Weight& w);

/// Records int |u|^2 h and the identity's right side along a trajectory.
struct VirialSample {
  double t = 0.0;
  double g = 0.0;
  double lambda_h = 0.0;
  VirialRhs rhs;
};

struct VirialResidual {
  double t = 0.0;
  double g_second = 0.0;  // nonuniform three-point second difference
  double rhs = 0.0;
  double sixteen_E = 0.0;
  double boundary_term = 0.0;
  double residual = 0.0;      // g_second - rhs
  double rel_residual = 0.0;  // |residual| / (16 |E|)
};

/// Second differences over samples (i - stride, i, i + stride). Throws under-resolved when any
/// sample has lambda h above max_lambda_h.
std::vector<VirialResidual> virial_identity_residual(const std::vector<VirialSample>& samples, int stride = 1,
                                                     double max_lambda_h = 0.2);

// Blow-up rate -------------------------------------------------------------------

struct BlowupTimeFit {
  double T_est = 0.0;
  double slope = 0.0;  // d(1/lambda)/dt
  double r2 = 0.0;
  bool valid = false;  // 1/lambda decreasing and extrapolates past the last time
};

/// Least-squares line through the tail of 1/lambda(t); T_est is its zero.
BlowupTimeFit fit_blowup_time(const DiagnosticsSeries& s, double tail_fraction = 0.5);

struct RateBoundRow {
  double t = 0.0;
  double margin = 0.0;  // ||grad u|| (T - t) 2 sqrt(2E) - ||Q||^2
};

struct RateBoundReport {
  bool applicable = false;
  std::string reason;
  double min_margin = 0.0;
  std::vector<RateBoundRow> rows;
};

/// Lower bound ||Q||^2 / (2 sqrt(2E)(T - t)) <= ||grad u||; not applicable if E <= 0 or T_est <= last t.
RateBoundReport rate_bound_monitor(const DiagnosticsSeries& s, double T_est, double mass_q);

// Variance -------------------------------------------------------------------------

struct VarianceRow {
  double t = 0.0;
  double g = 0.0;                      // int |u|^2 |x - c|^2
  std::vector<double> g_n;             // int |u|^2 psi_n
  std::vector<double> tail_phi_n;      // int |u|^2 phi_n^2
  std::vector<double> tail_mass_2n;    // int_{|x - c| > 2n} |u|^2
};

VarianceRow variance_row(const Field2D& u, double t, const std::vector<double>& ns, Point center = {});

/// sup |grad psi|^2 / psi for the localized square weight (scale invariant).
double psi_gradient_constant();

/// Quadratic least-squares extrapolation of g to time T from the last `count` rows.
double extrapolate_variance(const std::vector<VarianceRow>& rows, double T, std::size_t count = 8);

// Per-snapshot inequalities -------------------------------------------------------------

struct SnapshotChecks {
  double uncertainty_lhs = 0.0;  // ||u||^4
  double uncertainty_rhs = 0.0;  // g ||grad u||^2 about the centre
  bool uncertainty = false;
  double lambda_gap = 0.0;       // (lambda - lambda_tilde) lambda
  double lambda_gap_bound = 0.0; // 2E / ||grad Q||^2
  bool lambda_gap_ok = false;
  double loc_virial_lhs = 0.0;   // |g_phi'|^2
  double loc_virial_rhs = 0.0;   // 8E int |u|^2 |grad(phi^2 |x|^2)|^2
  bool loc_virial_ok = false;
};

SnapshotChecks snapshot_checks(const Field2D& u, const DiagnosticsContext& ctx, double tol = 1e-6);

/// int over the complement of B(center, radius) of |grad u|^2.
double outer_gradient_energy(const Field2D& u, Point center, double radius);

}  // namespace blowup
