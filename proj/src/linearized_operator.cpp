#include "blowup/linearized_operator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "blowup/error.hpp"

namespace blowup {

std::string to_string(OperatorVariant v) {
  switch (v) {
    case OperatorVariant::L: return "L";
    case OperatorVariant::L_minus: return "L_minus";
    case OperatorVariant::L_minus_literal: return "L_minus_literal";
  }
  return "?";
}

namespace {

double potential_of(double q, OperatorVariant v) {
  switch (v) {
    case OperatorVariant::L: return 1.0 - 3.0 * q * q;
    case OperatorVariant::L_minus: return 1.0 - q * q;
    case OperatorVariant::L_minus_literal: return 1.0 - q;
  }
  return 1.0;
}

double dotv(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

AngularModeOperator make_mode_operator(const RadialProfile& p, int m, double h, double r_max,
                                       OperatorVariant variant) {
  require(m >= 0, ErrorCode::invalid_argument, "mode index must be non-negative");
  require(h > 0.0 && r_max > 2.0 * h, ErrorCode::invalid_argument, "bad radial grid");
  const auto n = static_cast<std::size_t>(std::llround(r_max / h));
  AngularModeOperator op;
  op.m = m;
  op.h = h;
  op.variant = variant;
  op.r_grid.resize(n);
  op.potential.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double r = (static_cast<double>(j) + 0.5) * h;
    op.r_grid[j] = r;
    op.potential[j] = potential_of(p.value(r), variant);
  }
  return op;
}

SymTridiagonal AngularModeOperator::symmetrized() const {
  const std::size_t n = r_grid.size();
  const double h2 = h * h;
  const double m2 = static_cast<double>(m) * m;
  SymTridiagonal t;
  t.diag.resize(n);
  t.off.resize(n > 0 ? n - 1 : 0);
  for (std::size_t j = 0; j < n; ++j) {
    const double r = r_grid[j];
    const double rp = r + 0.5 * h;
    const double rm = r - 0.5 * h;  // 0 at j = 0
    t.diag[j] = (rp + rm) / (r * h2) + m2 / (r * r) + potential[j];
    if (j + 1 < n) t.off[j] = -rp / (h2 * std::sqrt(r * r_grid[j + 1]));
  }
  return t;
}

std::vector<double> AngularModeOperator::apply(const std::vector<double>& f) const {
  const std::size_t n = r_grid.size();
  const double h2 = h * h;
  const double m2 = static_cast<double>(m) * m;
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double r = r_grid[j];
    const double rp = r + 0.5 * h;
    const double rm = r - 0.5 * h;
    const double fp = j + 1 < n ? f[j + 1] : 0.0;
    const double fm = j > 0 ? f[j - 1] : 0.0;
    out[j] = -(rp * (fp - f[j]) - rm * (f[j] - fm)) / (r * h2) + (m2 / (r * r) + potential[j]) * f[j];
  }
  return out;
}

namespace {

Field2D apply_with_potential(const RadialProfile& p, const Field2D& f, Point center, OperatorVariant v) {
  const Grid2D& g = f.grid();
  require(g.h() <= 0.1, ErrorCode::grid_too_coarse, "apply_L needs h <= 0.1");
  Field2D out = laplacian(f);
  out *= -1.0;
  auto vals = out.values();
  for (std::size_t k : g.interior_nodes()) {
    const Point x = g.node(k % g.nx(), k / g.nx());
    vals[k] += potential_of(p.value(norm(x - center)), v) * f.at(k);
  }
  return out;
}

}  // namespace

Field2D apply_L(const RadialProfile& p, const Field2D& f, Point center) {
  return apply_with_potential(p, f, center, OperatorVariant::L);
}

Field2D apply_L_minus(const RadialProfile& p, const Field2D& f, Point center) {
  return apply_with_potential(p, f, center, OperatorVariant::L_minus);
}

double kernel_tolerance(const AngularModeOperator& op) {
  double vmax = 0.0;
  for (double v : op.potential) vmax = std::max(vmax, std::abs(v));
  return 10.0 * op.h * op.h * vmax;
}

ModeSpectrum mode_eigenpairs(const AngularModeOperator& op, int k) {
  require(k >= 3, ErrorCode::invalid_argument, "need at least 3 eigenpairs");
  require(op.r_max() >= 15.0 - 1e-9, ErrorCode::invalid_argument, "r_max must be >= 15");
  const SymTridiagonal t = op.symmetrized();
  const TridiagonalEigen e = lowest_eigenpairs(t, static_cast<std::size_t>(k));
  ModeSpectrum out;
  out.m = op.m;
  out.eigenvalues = e.values;
  for (const auto& v : e.vectors) {
    std::vector<double> f(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) f[j] = v[j] / std::sqrt(op.r_grid[j] * op.h);
    out.eigenvectors.push_back(std::move(f));
  }
  return out;
}

SpectrumReport compute_spectrum(const RadialProfile& p, int max_mode, int k, double h, double r_max,
                                OperatorVariant variant) {
  require(max_mode >= 0, ErrorCode::invalid_argument, "max_mode must be >= 0");
  SpectrumReport rep;
  rep.variant = variant;
  rep.h = h;
  rep.r_max = r_max;
  rep.modes.resize(static_cast<std::size_t>(max_mode) + 1);
  std::vector<double> tols(rep.modes.size());

  for (int m = 0; m <= max_mode; ++m) {
    const auto op = make_mode_operator(p, m, h, r_max, variant);
    tols[static_cast<std::size_t>(m)] = kernel_tolerance(op);
    rep.modes[static_cast<std::size_t>(m)] = mode_eigenpairs(op, k);
  }
  rep.kernel_tol = *std::max_element(tols.begin(), tols.end());
  for (const auto& ms : rep.modes)
    for (double lam : ms.eigenvalues)
      if (std::abs(lam) <= rep.kernel_tol) rep.kernel_dimension_estimate += ms.m == 0 ? 1 : 2;
  return rep;
}

double projected_lowest(const AngularModeOperator& op, const std::vector<std::vector<double>>& constraints,
                        int n_iter, double tol, int* iterations, bool* converged) {
  const SymTridiagonal t = op.symmetrized();
  const std::size_t n = t.size();
  const double lam0 = lowest_eigenpairs(t, 1).values[0];

  // constraints in the symmetrised variables: c_j sqrt(r_j), orthonormalised
  std::vector<std::vector<double>> cs;
  for (const auto& c : constraints) {
    require(c.size() == n, ErrorCode::invalid_argument, "constraint length mismatch");
    std::vector<double> v(n);
    for (std::size_t j = 0; j < n; ++j) v[j] = c[j] * std::sqrt(op.r_grid[j]);
    const double n0 = std::sqrt(dotv(v, v));
    require(n0 > 0.0, ErrorCode::projector_rank_deficient, "zero constraint vector");
    for (auto& x : v) x /= n0;
    for (const auto& w : cs) {
      const double s = dotv(v, w);
      for (std::size_t j = 0; j < n; ++j) v[j] -= s * w[j];
    }
    const double n1 = std::sqrt(dotv(v, v));
    require(n1 > 1e-8, ErrorCode::projector_rank_deficient, "constraint vectors are numerically dependent");
    for (auto& x : v) x /= n1;
    cs.push_back(std::move(v));
  }

  const double sigma = lam0 - 1.0;
  const std::size_t p = cs.size();
  std::vector<std::vector<double>> z(p);
  for (std::size_t a = 0; a < p; ++a) z[a] = solve_shifted(t, sigma, cs[a]);
  // G = C^T (S - sigma)^{-1} C; p <= a few, solve by Gauss-Jordan
  std::vector<double> g(p * p);
  for (std::size_t a = 0; a < p; ++a)
    for (std::size_t b = 0; b < p; ++b) g[a * p + b] = dotv(cs[a], z[b]);

  auto solve_small = [&](std::vector<double> rhs) {
    std::vector<double> m = g;
    for (std::size_t c = 0; c < p; ++c) {
      std::size_t piv = c;
      for (std::size_t r = c + 1; r < p; ++r)
        if (std::abs(m[r * p + c]) > std::abs(m[piv * p + c])) piv = r;
      if (piv != c) {
        for (std::size_t k = 0; k < p; ++k) std::swap(m[c * p + k], m[piv * p + k]);
        std::swap(rhs[c], rhs[piv]);
      }
      const double d = m[c * p + c];
      require(std::abs(d) > 1e-300, ErrorCode::projector_rank_deficient, "singular constraint Gram matrix");
      for (std::size_t r = 0; r < p; ++r) {
        if (r == c) continue;
        const double f = m[r * p + c] / d;
        for (std::size_t k = 0; k < p; ++k) m[r * p + k] -= f * m[c * p + k];
        rhs[r] -= f * rhs[c];
      }
    }
    for (std::size_t c = 0; c < p; ++c) rhs[c] /= m[c * p + c];
    return rhs;
  };

  auto project = [&](std::vector<double>& v) {
    for (const auto& w : cs) {
      const double s = dotv(v, w);
      for (std::size_t j = 0; j < n; ++j) v[j] -= s * w[j];
    }
  };

  std::vector<double> x(n);
  for (std::size_t j = 0; j < n; ++j) x[j] = std::exp(-op.r_grid[j]) + 1e-3;
  project(x);
  double nx = std::sqrt(dotv(x, x));
  for (auto& v : x) v /= nx;

  std::vector<double> tx(n);
  double mu = 0.0, mu_prev = 0.0;
  bool done = false;
  int it = 0;
  for (; it < n_iter; ++it) {
    std::vector<double> y = solve_shifted(t, sigma, x);
    if (p > 0) {
      std::vector<double> cy(p);
      for (std::size_t a = 0; a < p; ++a) cy[a] = dotv(cs[a], y);
      const auto coef = solve_small(cy);
      for (std::size_t a = 0; a < p; ++a)
        for (std::size_t j = 0; j < n; ++j) y[j] -= coef[a] * z[a][j];
      project(y);  // remove round-off drift
    }
    nx = std::sqrt(dotv(y, y));
    if (!std::isfinite(nx) || nx == 0.0) throw Error(ErrorCode::eigensolver_failure, "projected inverse iteration breakdown");
    for (std::size_t j = 0; j < n; ++j) x[j] = y[j] / nx;
    t.multiply(x, tx);
    mu = dotv(x, tx);
    if (it > 2 && std::abs(mu - mu_prev) <= tol * std::max(1.0, std::abs(mu))) {
      done = true;
      ++it;
      break;
    }
    mu_prev = mu;
  }
  if (iterations) *iterations = it;
  if (converged) *converged = done;
  return mu;
}

CoercivityResult constrained_coercivity(const RadialProfile& p, const CoercivityOptions& opts) {
  require(opts.max_mode >= 1, ErrorCode::invalid_argument, "coercivity needs modes 0 and 1");
  require(opts.n_iter > 0, ErrorCode::invalid_argument, "n_iter must be positive");
  CoercivityResult res;
  res.per_mode.assign(static_cast<std::size_t>(opts.max_mode) + 1, 0.0);
  res.converged = true;
  for (int m = 0; m <= opts.max_mode; ++m) {
    const auto op = make_mode_operator(p, m, opts.h, opts.r_max, OperatorVariant::L);
    std::vector<std::vector<double>> cons;
    if (m == 0 && opts.constraints != ConstraintSet::none) {
      std::vector<double> c(op.r_grid.size());
      for (std::size_t j = 0; j < c.size(); ++j) c[j] = p.value(op.r_grid[j]);
      cons.push_back(std::move(c));
    }
    if (m == 1 && opts.constraints == ConstraintSet::full) {
      // d_i Q^3 = 3 Q^2 Q' (x_i / r): the cos and sin copies share this radial part
      std::vector<double> c(op.r_grid.size());
      for (std::size_t j = 0; j < c.size(); ++j) {
        const double q = p.value(op.r_grid[j]);
        c[j] = 3.0 * q * q * p.derivative(op.r_grid[j]);
      }
      cons.push_back(std::move(c));
    }
    double v;
    if (cons.empty()) {
      v = lowest_eigenpairs(op.symmetrized(), 1).values[0];
    } else {
      int iters = 0;
      bool conv = false;
      v = projected_lowest(op, cons, opts.n_iter, opts.tol, &iters, &conv);
      res.iterations = std::max(res.iterations, iters);
      res.converged = res.converged && conv;
    }
    res.per_mode[static_cast<std::size_t>(m)] = v;
  }
  const auto it = std::min_element(res.per_mode.begin(), res.per_mode.end());
  res.I = *it;
  res.minimizing_mode = static_cast<int>(it - res.per_mode.begin());
  return res;
}

MarisReport maris_hypothesis_check(const RadialProfile& p, int n_U, int n_u) {
  require(n_U >= 100, ErrorCode::invalid_argument, "n_U must be >= 100");
  require(n_u >= 2, ErrorCode::invalid_argument, "n_u must be >= 2");
  MarisReport rep;
  rep.n_U = n_U;
  rep.n_u = n_u;
  const double q0 = p.q0;
  const double a0 = 1.0;
  auto g = [](double s) { return s - s * s * s; };
  auto gp = [](double s) { return 1.0 - 3.0 * s * s; };
  const double slack = 1e-12;
  for (int i = 1; i <= n_U; ++i) {
    const double U = a0 + (q0 - a0) * i / n_U;
    const double lam = 1.0 - 1.0 / (U * U);
    for (int k = 0; k < n_u; ++k) {
      const double u = q0 * k / (n_u - 1);
      const double I = lam * u * gp(u) - (lam + 2.0) * g(u);
      const bool bad = (u <= U && I > slack) || (u >= U && I < -slack);
      if (bad) rep.violations.push_back({U, u, I});
    }
  }
  rep.sign_conditions = rep.violations.empty();
  const NormReport nr = radial_norms(p);
  rep.integral_G = 0.5 * nr.mass_sq - 0.25 * nr.l4_fourth;
  rep.integral_G_rel = rep.integral_G / nr.mass_sq;
  rep.integral_ok = std::abs(rep.integral_G) <= 1e-4 * nr.mass_sq;
  rep.q0_margin = q0 - std::sqrt(2.0);
  return rep;
}

}  // namespace blowup
