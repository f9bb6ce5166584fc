#include "blowup/modulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "blowup/error.hpp"

namespace blowup {

CenterMode center_mode_from_string(const std::string& s) {
  if (s == "momentum") return CenterMode::momentum;
  if (s == "centroid") return CenterMode::centroid;
  throw Error(ErrorCode::invalid_argument, "unknown centre mode '" + s + "' (momentum|centroid)");
}

std::string to_string(CenterMode m) { return m == CenterMode::momentum ? "momentum" : "centroid"; }

namespace {

// Lattice window |x - c| <= radius, as an index box plus a membership test.
struct Window {
  std::size_t i0 = 0, i1 = 0, j0 = 0, j1 = 0;  // inclusive box
  Point c{};
  double r2 = 0.0;
  const Grid2D* g = nullptr;

  Window(const Grid2D& grid, Point center, double radius) : c(center), r2(radius * radius), g(&grid) {
    auto clampi = [](double v, std::size_t n) {
      return static_cast<std::size_t>(std::clamp(v, 0.0, static_cast<double>(n - 1)));
    };
    const double h = grid.h();
    const Point o = grid.origin();
    i0 = clampi(std::floor((c.x - radius - o.x) / h), grid.nx());
    i1 = clampi(std::ceil((c.x + radius - o.x) / h), grid.nx());
    j0 = clampi(std::floor((c.y - radius - o.y) / h), grid.ny());
    j1 = clampi(std::ceil((c.y + radius - o.y) / h), grid.ny());
  }
  bool inside(std::size_t i, std::size_t j) const {
    const Point d = g->node(i, j) - c;
    return dot(d, d) <= r2;
  }
  template <class F>
  void for_each(F&& f) const {
    for (std::size_t j = j0; j <= j1; ++j)
      for (std::size_t i = i0; i <= i1; ++i)
        if (inside(i, j)) f(i, j, g->index(i, j), g->node(i, j));
  }
};

struct Norms {
  double l2 = 0.0;    // sum |R|^2 h^2
  double grad = 0.0;  // sum over window edges |dR|^2 (edge form)
};

// R sampled on the window box (row-major over the box); edge sums only between nodes in the window.
template <class V>
Norms window_norms(const Window& w, const std::vector<V>& r, const std::vector<std::uint8_t>& in) {
  const std::size_t bw = w.i1 - w.i0 + 1;
  const std::size_t bh = w.j1 - w.j0 + 1;
  const double h2 = w.g->h() * w.g->h();
  Norms n;
  for (std::size_t b = 0; b < bh; ++b)
    for (std::size_t a = 0; a < bw; ++a) {
      const std::size_t k = b * bw + a;
      if (!in[k]) continue;
      n.l2 += std::norm(r[k]) * h2;
      if (a + 1 < bw && in[k + 1]) n.grad += std::norm(r[k + 1] - r[k]);
      if (b + 1 < bh && in[k + bw]) n.grad += std::norm(r[k + bw] - r[k]);
    }
  return n;
}

// Q^3 derivatives for the orthogonality conditions: P = Q^3, radial.
struct CubeJet {
  double p1 = 0.0;  // P'
  double p2 = 0.0;  // P''
};
CubeJet cube_jet(const RadialProfile& p, double r) {
  const double q = p.value(r), q1 = p.derivative(r), q2 = p.second_derivative(r);
  return {3.0 * q * q * q1, 6.0 * q * q1 * q1 + 3.0 * q * q * q2};
}

Point momentum_center(const Field2D& u, double mass_q) {
  const Grid2D& g = u.grid();
  double sx = 0.0, sy = 0.0;
  for (std::size_t k : g.interior_nodes()) {
    const Point x = g.node(k % g.nx(), k / g.nx());
    const double m = std::norm(u.at(k));
    sx += m * x.x;
    sy += m * x.y;
  }
  const double h2 = g.h() * g.h();
  return {sx * h2 / mass_q, sy * h2 / mass_q};
}

// Argmax of |u|, then two passes of the |u|^2 centroid over B(c, 3/lambda).
Point centroid_center(const Field2D& u, double lambda) {
  const Grid2D& g = u.grid();
  std::size_t best = g.interior_nodes().front();
  for (std::size_t k : g.interior_nodes())
    if (std::norm(u.at(k)) > std::norm(u.at(best))) best = k;
  Point c = g.node(best % g.nx(), best / g.nx());
  for (int pass = 0; pass < 2; ++pass) {
    double s = 0.0, sx = 0.0, sy = 0.0;
    Window(g, c, 3.0 / lambda).for_each([&](std::size_t, std::size_t, std::size_t k, Point x) {
      const double m = std::norm(u.at(k));
      s += m;
      sx += m * x.x;
      sy += m * x.y;
    });
    if (s > 0.0) c = {sx / s, sy / s};
  }
  return c;
}

struct ModulusFit {
  double l2 = 0.0, h1 = 0.0, form_L = 0.0, ortho = 0.0;
};

// R~ on the window for |u| about c at scale lam; optionally returns the orthogonality residuals.
ModulusFit modulus_residual(const Field2D& u, const RadialProfile& p, double lam, Point c, double window,
                            double* g_out = nullptr, double* jac_out = nullptr) {
  const Window w(u.grid(), c, window / lam);
  const std::size_t bw = w.i1 - w.i0 + 1;
  const std::size_t bh = w.j1 - w.j0 + 1;
  std::vector<double> r(bw * bh, 0.0);
  std::vector<std::uint8_t> in(bw * bh, 0);
  const double h2 = u.grid().h() * u.grid().h();
  double pot = 0.0, gx = 0.0, gy = 0.0, nx2 = 0.0, ny2 = 0.0;
  double gu[2] = {0, 0}, jac[4] = {0, 0, 0, 0};
  w.for_each([&](std::size_t i, std::size_t j, std::size_t k, Point x) {
    const std::size_t b = (j - w.j0) * bw + (i - w.i0);
    in[b] = 1;
    const Point d = lam * (x - c);
    const double rho = norm(d);
    const double q = p.value(rho);
    const double a = std::abs(u.at(k));
    r[b] = a - lam * q;
    pot += (1.0 - 3.0 * q * q) * r[b] * r[b] * h2;
    const CubeJet cj = cube_jet(p, rho);
    const double ex = rho > 0.0 ? d.x / rho : 0.0, ey = rho > 0.0 ? d.y / rho : 0.0;
    const double dpx = cj.p1 * ex, dpy = cj.p1 * ey;
    gx += dpx * r[b] * h2;
    gy += dpy * r[b] * h2;
    nx2 += dpx * dpx * h2;
    ny2 += dpy * dpy * h2;
    // conditions int dP(lam (x - c)) |u| dx and their c-derivatives
    gu[0] += dpx * a * h2;
    gu[1] += dpy * a * h2;
    const double s = rho > 1e-12 ? cj.p1 / rho : cj.p2;
    jac[0] += -lam * (cj.p2 * ex * ex + s * (1.0 - ex * ex)) * a * h2;
    jac[1] += -lam * (cj.p2 * ex * ey - s * ex * ey) * a * h2;
    jac[3] += -lam * (cj.p2 * ey * ey + s * (1.0 - ey * ey)) * a * h2;
  });
  jac[2] = jac[1];
  const Norms n = window_norms(w, r, in);
  ModulusFit f;
  f.l2 = std::sqrt(n.l2);
  const double grad_y = n.grad / (lam * lam);
  f.h1 = std::sqrt(n.l2 + grad_y);
  f.form_L = grad_y + pot;
  // <d_i P, R~>_y = lam int dP R^ dx, ||d_i P||_y = lam ||dP||_x
  const double ox = nx2 > 0.0 ? std::abs(gx) / (f.l2 * std::sqrt(nx2)) : 0.0;
  const double oy = ny2 > 0.0 ? std::abs(gy) / (f.l2 * std::sqrt(ny2)) : 0.0;
  f.ortho = f.l2 > 0.0 ? std::max(ox, oy) : 0.0;
  if (g_out) std::copy(gu, gu + 2, g_out);
  if (jac_out) std::copy(jac, jac + 4, jac_out);
  return f;
}

}  // namespace

double residual_l2_at(const Field2D& u, const RadialProfile& p, double lambda, Point center, double theta,
                      double window) {
  const cplx ph = std::polar(1.0, theta);
  const double h2 = u.grid().h() * u.grid().h();
  double s = 0.0;
  Window(u.grid(), center, window / lambda).for_each([&](std::size_t, std::size_t, std::size_t k, Point x) {
    s += std::norm(ph * u.at(k) - lambda * p.value(norm(lambda * (x - center)))) * h2;
  });
  return std::sqrt(s);
}

ModulationFit fit_modulation(const Field2D& u, const RadialProfile& p, const ModulationOptions& opts) {
  const Grid2D& g = u.grid();
  const NormReport nr = radial_norms(p);
  const double gq = std::sqrt(nr.grad_sq);
  ModulationFit f;
  f.lambda = std::sqrt(grad_norm_sq(u)) / gq;
  f.lambda_tilde = std::sqrt(grad_norm_sq(modulus(u))) / gq;
  require(f.lambda > 0.0, ErrorCode::invalid_argument, "field is zero");
  if (f.lambda * g.h() > opts.max_lambda_h)
    throw Error(ErrorCode::core_unresolved, "lambda h = " + std::to_string(f.lambda * g.h()) + " exceeds " +
                                                std::to_string(opts.max_lambda_h));
  f.x_momentum = momentum_center(u, nr.mass_sq);
  f.x_centroid = centroid_center(u, f.lambda);
  f.x_center = opts.mode == CenterMode::momentum ? f.x_momentum : f.x_centroid;
  if (!g.domain().contains(f.x_center))
    throw Error(ErrorCode::off_domain_center, "centre (" + std::to_string(f.x_center.x) + ", " +
                                                  std::to_string(f.x_center.y) + ") lies outside the domain");

  // complex fit: the phase maximizing Re <e^{i theta} u_r, Q> is -arg int u Q(lambda (x - c))
  const double lam = f.lambda;
  const Point c = f.x_center;
  const Window w(g, c, opts.window / lam);
  const std::size_t bw = w.i1 - w.i0 + 1;
  const std::size_t bh = w.j1 - w.j0 + 1;
  std::vector<cplx> r(bw * bh, 0.0);
  std::vector<double> qs(bw * bh, 0.0);
  std::vector<std::uint8_t> in(bw * bh, 0);
  const double h2 = g.h() * g.h();
  cplx s = 0.0;
  w.for_each([&](std::size_t i, std::size_t j, std::size_t k, Point x) {
    const std::size_t b = (j - w.j0) * bw + (i - w.i0);
    in[b] = 1;
    qs[b] = p.value(norm(lam * (x - c)));
    s += u.at(k) * qs[b];
  });
  f.theta = std::abs(s) > 0.0 ? -std::arg(s) : 0.0;
  const cplx ph = std::polar(1.0, f.theta);
  double qre = 0.0, pot_re = 0.0, pot_im = 0.0;
  w.for_each([&](std::size_t i, std::size_t j, std::size_t k, Point) {
    const std::size_t b = (j - w.j0) * bw + (i - w.i0);
    r[b] = ph * u.at(k) - lam * qs[b];
    // y-space integrals: int Q Re R dy = int (lam Q) Re R^ dx
    qre += lam * qs[b] * r[b].real() * h2;
    pot_re += (1.0 - 3.0 * qs[b] * qs[b]) * r[b].real() * r[b].real() * h2;
    pot_im += (1.0 - qs[b] * qs[b]) * r[b].imag() * r[b].imag() * h2;
  });
  const Norms n = window_norms(w, r, in);
  f.residual_l2 = std::sqrt(n.l2);
  f.residual_h1 = std::sqrt(n.l2 + n.grad / (lam * lam));
  f.lambda_residual_product = lam * f.residual_h1;
  f.mass_identity_defect = n.l2 + 2.0 * qre;
  {
    std::vector<double> re(r.size()), im(r.size());
    for (std::size_t b = 0; b < r.size(); ++b) {
      re[b] = r[b].real();
      im[b] = r[b].imag();
    }
    f.form_L_re = window_norms(w, re, in).grad / (lam * lam) + pot_re;
    f.form_Lminus_im = window_norms(w, im, in).grad / (lam * lam) + pot_im;
  }

  // modulus fit at lambda~, centre refined by one damped Newton step on <d_i Q^3, R~> = 0
  const double lt = f.lambda_tilde;
  Point cr = c;
  if (opts.refine_center) {
    double gv[2], jac[4];
    modulus_residual(u, p, lt, cr, opts.window, gv, jac);
    const double det = jac[0] * jac[3] - jac[1] * jac[2];
    if (std::abs(det) > 0.0) {
      Point d{-(jac[3] * gv[0] - jac[1] * gv[1]) / det, -(-jac[2] * gv[0] + jac[0] * gv[1]) / det};
      const double cap = 0.5 / lt;
      const double dn = norm(d);
      if (dn > cap) d = (cap / dn) * d;
      if (g.domain().contains(cr + d)) cr = cr + d;
    }
  }
  f.x_refined = cr;
  const ModulusFit mf = modulus_residual(u, p, lt, cr, opts.window);
  f.mod_residual_l2 = mf.l2;
  f.mod_residual_h1 = mf.h1;
  f.mod_lambda_residual_product = f.lambda * mf.h1;
  f.mod_form_L = mf.form_L;
  f.ortho_ratio = mf.ortho;

  double rho = 0.0;
  for (std::size_t k : g.interior_nodes()) {
    const Point d = g.node(k % g.nx(), k / g.nx()) - c;
    rho += std::norm(u.at(k)) * dot(d, d);
  }
  f.rho = lam * lam * rho * h2;
  return f;
}

DecayReport residual_decay_check(const std::vector<ModulationFit>& fits, bool modulus, double min_growth) {
  require(!fits.empty(), ErrorCode::invalid_argument, "no fits");
  DecayReport d;
  double lmin = fits.front().lambda, lmax = lmin;
  d.sup_product = 0.0;
  d.min_product = std::numeric_limits<double>::infinity();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& f : fits) {
    lmin = std::min(lmin, f.lambda);
    lmax = std::max(lmax, f.lambda);
    const double v = modulus ? f.mod_lambda_residual_product : f.lambda_residual_product;
    d.sup_product = std::max(d.sup_product, v);
    d.min_product = std::min(d.min_product, v);
    const double x = std::log(f.lambda), y = std::log(std::max(v, 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  d.lambda_growth = lmax / lmin;
  if (d.lambda_growth < min_growth)
    throw Error(ErrorCode::insufficient_growth, "lambda grew only " + std::to_string(d.lambda_growth) + "x (need " +
                                                    std::to_string(min_growth) + "x)");
  const double n = static_cast<double>(fits.size());
  const double den = n * sxx - sx * sx;
  d.trend = den > 0.0 ? (n * sxy - sx * sy) / den : 0.0;
  d.band_ratio = d.min_product > 0.0 ? d.sup_product / d.min_product : std::numeric_limits<double>::infinity();
  d.bounded = d.band_ratio <= 2.0;
  return d;
}

EquivirReport equivir_check(const std::vector<ModulationFit>& fits) {
  require(!fits.empty(), ErrorCode::invalid_argument, "no fits");
  EquivirReport e;
  for (const auto& f : fits) e.rho.push_back(f.rho);
  e.rho_min = *std::min_element(e.rho.begin(), e.rho.end());
  e.rho_max = *std::max_element(e.rho.begin(), e.rho.end());
  e.band_ratio = e.rho_min > 0.0 ? e.rho_max / e.rho_min : std::numeric_limits<double>::infinity();
  e.within_band = e.band_ratio <= 10.0;
  return e;
}

std::vector<BoundaryDistanceRow> boundary_distance_monitor(const std::vector<double>& times,
                                                           const std::vector<ModulationFit>& fits,
                                                           const DomainSpec& domain, double T_est) {
  require(times.size() == fits.size(), ErrorCode::invalid_argument, "times and fits differ in length");
  std::vector<BoundaryDistanceRow> rows;
  for (std::size_t i = 0; i < fits.size(); ++i)
    rows.push_back({times[i], fits[i].lambda * domain.boundary_distance(fits[i].x_center), norm(fits[i].x_center),
                    T_est - times[i]});
  return rows;
}

double momentum_centroid_gap(const std::vector<ModulationFit>& fits) {
  double m = 0.0;
  for (const auto& f : fits) m = std::max(m, norm(f.x_momentum - f.x_centroid) * f.lambda * f.lambda);
  return m;
}

void write_modfit_csv(const std::vector<double>& times, const std::vector<ModulationFit>& fits,
                      const std::string& path) {
  require(times.size() == fits.size(), ErrorCode::invalid_argument, "times and fits differ in length");
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error(ErrorCode::io_error, "cannot write " + path);
  // residual columns are the modulus fit; the complex fit follows at the end
  std::fprintf(f, "t,lambda,lambda_tilde,xc,yc,theta,res_l2,res_h1,lam_res_product,rho,"
                  "res_l2_complex,res_h1_complex,lam_res_product_complex,ortho_ratio\n");
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const auto& m = fits[i];
    std::fprintf(f, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", times[i],
                 m.lambda, m.lambda_tilde, m.x_center.x, m.x_center.y, m.theta, m.mod_residual_l2, m.mod_residual_h1,
                 m.mod_lambda_residual_product, m.rho, m.residual_l2, m.residual_h1, m.lambda_residual_product,
                 m.ortho_ratio);
  }
  std::fclose(f);
}

}  // namespace blowup
