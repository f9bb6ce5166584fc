#include "blowup/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "blowup/error.hpp"

namespace blowup {

DiagnosticsContext DiagnosticsContext::from_profile(const RadialProfile& p, Point virial_center, double loc_radius) {
  const NormReport nr = radial_norms(p);
  DiagnosticsContext ctx;
  ctx.grad_q_sq = nr.grad_sq;
  ctx.mass_q = nr.mass_sq;
  ctx.virial_center = virial_center;
  ctx.loc_radius = loc_radius;
  ctx.flux_weight = Weight::quadratic(virial_center);
  return ctx;
}

double energy(const Field2D& u) { return 0.5 * grad_norm_sq(u) - 0.25 * l4_fourth(u); }

namespace {

std::vector<double> nodal_weight(const Grid2D& g, const Weight& w) {
  // values on every lattice node (exterior nodes are touched by boundary edges)
  std::vector<double> out(g.size());
  for (std::size_t j = 0; j < g.ny(); ++j)
    for (std::size_t i = 0; i < g.nx(); ++i) out[g.index(i, j)] = w.value(g.node(i, j));
  return out;
}

Point node_of(const Grid2D& g, std::size_t k) { return g.node(k % g.nx(), k / g.nx()); }

}  // namespace

double weighted_mass(const Field2D& u, const Weight& w) {
  const Grid2D& g = u.grid();
  double s = 0.0;
  for (std::size_t k : g.interior_nodes()) s += std::norm(u.at(k)) * w.value(node_of(g, k));
  return s * g.h() * g.h();
}

Point first_moment(const Field2D& u) {
  const Grid2D& g = u.grid();
  double sx = 0.0, sy = 0.0;
  for (std::size_t k : g.interior_nodes()) {
    const Point x = node_of(g, k);
    const double m = std::norm(u.at(k));
    sx += m * x.x;
    sy += m * x.y;
  }
  const double a = g.h() * g.h();
  return {sx * a, sy * a};
}

double momentum_derivative(const Field2D& u, const Weight& w) {
  const Grid2D& g = u.grid();
  const auto wv = nodal_weight(g, w);
  const auto v = u.values();
  const std::size_t nx = g.nx();
  double s = 0.0;
  // edges to non-interior nodes carry u = 0 and contribute nothing
  for (std::size_t k : g.interior_nodes()) {
    const cplx ck = std::conj(v[k]);
    s += (wv[k + 1] - wv[k]) * (ck * v[k + 1]).imag();
    s += (wv[k + nx] - wv[k]) * (ck * v[k + nx]).imag();
  }
  return 2.0 * s;
}

double weighted_gradient_mass(const Field2D& u, const Weight& w) {
  const Grid2D& g = u.grid();
  const auto wv = nodal_weight(g, w);
  const auto v = u.values();
  const auto mask = g.interior_mask();
  const std::size_t nx = g.nx();
  double s = 0.0;
  for (std::size_t k : g.interior_nodes()) {
    const double mk = std::norm(v[k]);
    auto edge = [&](std::size_t a, std::size_t b) {
      const double d = wv[b] - wv[a];
      s += d * d * 0.5 * (std::norm(v[a]) + std::norm(v[b]));
    };
    edge(k, k + 1);
    edge(k, k + nx);
    if (!mask[k - 1]) s += std::pow(wv[k] - wv[k - 1], 2) * 0.5 * mk;
    if (!mask[k - nx]) s += std::pow(wv[k] - wv[k - nx], 2) * 0.5 * mk;
  }
  return s;
}

double concentration_radius(const Field2D& u, Point center, double fraction) {
  const Grid2D& g = u.grid();
  const double h = g.h();
  double rmax = 0.0;
  for (std::size_t k : g.interior_nodes()) rmax = std::max(rmax, norm(node_of(g, k) - center));
  const double bw = h / 8.0;
  const std::size_t nb = static_cast<std::size_t>(rmax / bw) + 2;
  std::vector<double> hist(nb, 0.0);
  double total = 0.0;
  for (std::size_t k : g.interior_nodes()) {
    const double m = std::norm(u.at(k));
    hist[static_cast<std::size_t>(norm(node_of(g, k) - center) / bw)] += m;
    total += m;
  }
  if (total <= 0.0) return 0.0;
  const double target = fraction * total;
  double acc = 0.0;
  for (std::size_t b = 0; b < nb; ++b) {
    if (acc + hist[b] >= target) {
      const double f = hist[b] > 0.0 ? (target - acc) / hist[b] : 0.0;
      return (static_cast<double>(b) + f) * bw;
    }
    acc += hist[b];
  }
  return rmax;
}

double boundary_flux(const Field2D& u, const Weight& w) {
  const Grid2D& g = u.grid();
  const auto pts = g.boundary();
  std::vector<double> vals(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const NormalDerivative dn = normal_derivative_at(u, pts[i]);
    vals[i] = -2.0 * dn.abs_sq() * dot(w.grad(pts[i].position), pts[i].normal);
  }
  return boundary_integral(g, vals);
}

StarResult cauchy_schwarz_star(const Field2D& v, const Weight& theta, double mass_q) {
  const double m = mass(v);
  require(m <= mass_q * (1.0 + 1e-9) * (1.0 + 1e-9), ErrorCode::supercritical_mass,
          "(*) requires critical or subcritical mass");
  StarResult r;
  // int Im(v grad conj v) . grad theta = -(1/2) momentum_derivative
  r.lhs = std::abs(0.5 * momentum_derivative(v, theta));
  r.energy = energy(v);
  r.rhs = std::sqrt(std::max(0.0, 2.0 * r.energy * weighted_gradient_mass(v, theta)));
  r.holds = r.lhs <= r.rhs + 1e-9;
  return r;
}

VirialRhs virial_rhs(const Field2D& u, const Weight& w) {
  const Grid2D& g = u.grid();
  const Gradient du = gradient(u);
  VirialRhs out;
  out.sixteen_E = 16.0 * energy(u);
  double kin = 0.0, bil = 0.0, hes = 0.0;
  for (std::size_t k : g.interior_nodes()) {
    const Point x = node_of(g, k);
    const cplx ux = du.dx.at(k), uy = du.dy.at(k);
    const double gu2 = std::norm(ux) + std::norm(uy);
    const double m = std::norm(u.at(k));
    const auto H = w.hessian(x);
    const double lap = H[0] + H[2];
    kin += (2.0 * gu2 - m * m) * (4.0 - lap);
    bil += m * w.bilaplacian(x);
    const double quad = std::norm(ux) * H[0] + 2.0 * (ux * std::conj(uy)).real() * H[1] + std::norm(uy) * H[2];
    hes += 4.0 * quad - 2.0 * gu2 * lap;
  }
  const double a = g.h() * g.h();
  out.kinetic_term = -kin * a;
  out.bilaplacian_term = -bil * a;
  out.hessian_term = hes * a;
  out.boundary_term = boundary_flux(u, w);
  return out;
}

std::vector<VirialResidual> virial_identity_residual(const std::vector<VirialSample>& samples, int stride,
                                                     double max_lambda_h) {
  require(stride >= 1, ErrorCode::invalid_argument, "stride must be >= 1");
  for (const auto& s : samples)
    require(s.lambda_h <= max_lambda_h, ErrorCode::under_resolved, "trajectory is not resolved");
  std::vector<VirialResidual> out;
  const auto st = static_cast<std::size_t>(stride);
  for (std::size_t i = st; i + st < samples.size(); ++i) {
    const auto& a = samples[i - st];
    const auto& b = samples[i];
    const auto& c = samples[i + st];
    const double d1 = b.t - a.t, d2 = c.t - b.t;
    VirialResidual r;
    r.t = b.t;
    r.g_second = 2.0 * ((c.g - b.g) / d2 - (b.g - a.g) / d1) / (d1 + d2);
    r.rhs = b.rhs.total();
    r.sixteen_E = b.rhs.sixteen_E;
    r.boundary_term = b.rhs.boundary_term;
    r.residual = r.g_second - r.rhs;
    r.rel_residual = std::abs(r.residual) / std::max(std::abs(r.sixteen_E), 1e-300);
    out.push_back(r);
  }
  return out;
}

DiagnosticsRow compute_row(const Field2D& u, double t, const DiagnosticsContext& ctx) {
  DiagnosticsRow r;
  r.t = t;
  r.mass = mass(u);
  const double k = grad_norm_sq(u);
  r.energy = 0.5 * k - 0.25 * l4_fourth(u);
  r.grad_norm = std::sqrt(k);
  const double gq = std::sqrt(ctx.grad_q_sq);
  r.lambda = r.grad_norm / gq;
  r.lambda_tilde = std::sqrt(grad_norm_sq(modulus(u))) / gq;
  const Point f = first_moment(u);
  r.fx = f.x;
  r.fy = f.y;
  r.virial = weighted_mass(u, Weight::quadratic(ctx.virial_center));
  r.virial_loc = weighted_mass(u, Weight::cutoff_square(ctx.loc_radius, ctx.virial_center));
  r.boundary_flux = ctx.boundary_flux ? boundary_flux(u, ctx.flux_weight) : 0.0;
  const Point c = r.mass > 0.0 ? (1.0 / r.mass) * f : ctx.virial_center;
  r.conc_radius_50 = concentration_radius(u, c, 0.5);
  return r;
}

static const char* kSeriesHeader =
    "t,mass,energy,grad_norm,lambda,lambda_tilde,fx,fy,virial,virial_loc,boundary_flux,conc_radius_50";

void write_series_csv(const DiagnosticsSeries& s, const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  require(fp != nullptr, ErrorCode::io_error, "cannot open " + path);
  std::fprintf(fp, "%s\n", kSeriesHeader);
  for (const auto& r : s)
    std::fprintf(fp, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.t, r.mass,
                 r.energy, r.grad_norm, r.lambda, r.lambda_tilde, r.fx, r.fy, r.virial, r.virial_loc,
                 r.boundary_flux, r.conc_radius_50);
  const bool ok = std::fclose(fp) == 0;
  require(ok, ErrorCode::io_error, "write failed: " + path);
}

DiagnosticsSeries read_series_csv(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::io_error, "cannot open " + path);
  std::string line;
  std::getline(in, line);
  require(line == kSeriesHeader, ErrorCode::io_error, "unexpected series header in " + path);
  DiagnosticsSeries s;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    DiagnosticsRow r;
    ls >> r.t >> r.mass >> r.energy >> r.grad_norm >> r.lambda >> r.lambda_tilde >> r.fx >> r.fy >> r.virial >>
        r.virial_loc >> r.boundary_flux >> r.conc_radius_50;
    require(!ls.fail(), ErrorCode::io_error, "malformed series row in " + path);
    s.push_back(r);
  }
  return s;
}

BlowupTimeFit fit_blowup_time(const DiagnosticsSeries& s, double tail_fraction) {
  BlowupTimeFit fit;
  if (s.size() < 3) return fit;
  const std::size_t n0 = static_cast<std::size_t>(std::floor((1.0 - tail_fraction) * static_cast<double>(s.size())));
  const std::size_t start = std::min(n0, s.size() - 3);
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  double n = 0;
  for (std::size_t i = start; i < s.size(); ++i) {
    const double x = s[i].t, y = 1.0 / s[i].lambda;
    sx += x; sy += y; sxx += x * x; sxy += x * y; syy += y * y;
    n += 1;
  }
  const double vx = sxx - sx * sx / n, vy = syy - sy * sy / n, cxy = sxy - sx * sy / n;
  if (vx <= 0.0) return fit;
  fit.slope = cxy / vx;
  const double icpt = (sy - fit.slope * sx) / n;
  fit.r2 = vy > 0.0 ? cxy * cxy / (vx * vy) : 1.0;
  if (fit.slope < 0.0) {
    fit.T_est = -icpt / fit.slope;
    fit.valid = fit.T_est > s.back().t;
  }
  return fit;
}

RateBoundReport rate_bound_monitor(const DiagnosticsSeries& s, double T_est, double mass_q) {
  RateBoundReport rep;
  if (s.empty()) {
    rep.reason = "empty series";
    return rep;
  }
  const double E = s.front().energy;
  if (!(E > 0.0)) {
    rep.reason = "energy is not positive";
    return rep;
  }
  if (!(T_est > s.back().t)) {
    rep.reason = "no blow-up time beyond the series";
    return rep;
  }
  rep.applicable = true;
  rep.min_margin = std::numeric_limits<double>::infinity();
  const double c = 2.0 * std::sqrt(2.0 * E);
  for (const auto& r : s) {
    const double m = r.grad_norm * (T_est - r.t) * c - mass_q;
    rep.rows.push_back({r.t, m});
    rep.min_margin = std::min(rep.min_margin, m);
  }
  return rep;
}

VarianceRow variance_row(const Field2D& u, double t, const std::vector<double>& ns, Point center) {
  VarianceRow row;
  row.t = t;
  row.g = weighted_mass(u, Weight::quadratic(center));
  const Grid2D& g = u.grid();
  for (double n : ns) {
    row.g_n.push_back(weighted_mass(u, Weight::localized_square(n, center)));
    const Weight tw = Weight::tail(n, center);
    double tail = 0.0, outer = 0.0;
    for (std::size_t k : g.interior_nodes()) {
      const Point x = node_of(g, k);
      const double m = std::norm(u.at(k));
      const double p = tw.value(x);
      tail += m * p * p;
      if (norm(x - center) > 2.0 * n) outer += m;
    }
    row.tail_phi_n.push_back(tail * g.h() * g.h());
    row.tail_mass_2n.push_back(outer * g.h() * g.h());
  }
  return row;
}

double psi_gradient_constant() {
  const Weight w = Weight::localized_square(1.0);
  double c = 0.0;
  for (int i = 1; i <= 4000; ++i) {
    const Point x{2.5 * i / 4000.0, 0.0};
    const Point gr = w.grad(x);
    c = std::max(c, dot(gr, gr) / w.value(x));
  }
  return c;
}

double extrapolate_variance(const std::vector<VarianceRow>& rows, double T, std::size_t count) {
  require(rows.size() >= 3, ErrorCode::invalid_argument, "need at least 3 rows");
  const std::size_t n = std::min(count, rows.size());
  const std::size_t s0 = rows.size() - n;
  // least squares g = a + b (t - T) + c (t - T)^2 via normal equations
  double m[3][4] = {};
  for (std::size_t i = s0; i < rows.size(); ++i) {
    const double x = rows[i].t - T;
    const double phi[3] = {1.0, x, x * x};
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) m[a][b] += phi[a] * phi[b];
      m[a][3] += phi[a] * rows[i].g;
    }
  }
  for (int c = 0; c < 3; ++c) {
    int piv = c;
    for (int r = c + 1; r < 3; ++r)
      if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    for (int k = 0; k < 4; ++k) std::swap(m[c][k], m[piv][k]);
    for (int r = 0; r < 3; ++r) {
      if (r == c || m[c][c] == 0.0) continue;
      const double f = m[r][c] / m[c][c];
      for (int k = 0; k < 4; ++k) m[r][k] -= f * m[c][k];
    }
  }
  return m[0][0] != 0.0 ? m[0][3] / m[0][0] : rows.back().g;
}

SnapshotChecks snapshot_checks(const Field2D& u, const DiagnosticsContext& ctx, double tol) {
  SnapshotChecks c;
  const double m = mass(u);
  const double k = grad_norm_sq(u);
  const double E = 0.5 * k - 0.25 * l4_fourth(u);
  c.uncertainty_lhs = m * m;
  c.uncertainty_rhs = weighted_mass(u, Weight::quadratic(ctx.virial_center)) * k;
  c.uncertainty = c.uncertainty_lhs <= c.uncertainty_rhs * (1.0 + tol);
  const double gq = std::sqrt(ctx.grad_q_sq);
  const double lam = std::sqrt(k) / gq;
  const double lt = std::sqrt(grad_norm_sq(modulus(u))) / gq;
  c.lambda_gap = (lam - lt) * lam;
  c.lambda_gap_bound = 2.0 * E / ctx.grad_q_sq;
  c.lambda_gap_ok = c.lambda_gap <= c.lambda_gap_bound + tol * std::max(1.0, lam * lam);
  const Weight w = Weight::cutoff_square(ctx.loc_radius, ctx.virial_center);
  const double gp = momentum_derivative(u, w);
  c.loc_virial_lhs = gp * gp;
  c.loc_virial_rhs = 8.0 * std::max(0.0, E) * weighted_gradient_mass(u, w);
  c.loc_virial_ok = c.loc_virial_lhs <= c.loc_virial_rhs * (1.0 + tol) + 1e-12;
  return c;
}

double outer_gradient_energy(const Field2D& u, Point center, double radius) {
  const Grid2D& g = u.grid();
  const auto v = u.values();
  const auto mask = g.interior_mask();
  const std::size_t nx = g.nx();
  double s = 0.0;
  // edge form restricted to edges whose midpoint is outside the ball
  for (std::size_t k : g.interior_nodes()) {
    const Point x = node_of(g, k);
    const double hh = 0.5 * g.h();
    auto outside = [&](Point mid) { return norm(mid - center) > radius; };
    if (outside({x.x + hh, x.y})) s += std::norm(v[k + 1] - v[k]);
    if (outside({x.x, x.y + hh})) s += std::norm(v[k + nx] - v[k]);
    if (!mask[k - 1] && outside({x.x - hh, x.y})) s += std::norm(v[k]);
    if (!mask[k - nx] && outside({x.x, x.y - hh})) s += std::norm(v[k]);
  }
  return s;
}

}  // namespace blowup
