#include "blowup/tridiagonal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "blowup/error.hpp"

namespace blowup {

void SymTridiagonal::multiply(std::span<const double> x, std::span<double> y) const {
  const std::size_t n = size();
  for (std::size_t i = 0; i < n; ++i) {
    double s = diag[i] * x[i];
    if (i > 0) s += off[i - 1] * x[i - 1];
    if (i + 1 < n) s += off[i] * x[i + 1];
    y[i] = s;
  }
}

std::size_t SymTridiagonal::count_below(double x) const {
  const std::size_t n = size();
  std::size_t count = 0;
  double q = 1.0;
  const double tiny = std::numeric_limits<double>::min() * 1e4;
  for (std::size_t i = 0; i < n; ++i) {
    const double e2 = i > 0 ? off[i - 1] * off[i - 1] : 0.0;
    q = diag[i] - x - (i > 0 ? e2 / q : 0.0);
    if (q == 0.0) q = -tiny;
    if (q < 0.0) ++count;
  }
  return count;
}

double SymTridiagonal::lower_bound() const {
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < size(); ++i) {
    double r = 0.0;
    if (i > 0) r += std::abs(off[i - 1]);
    if (i + 1 < size()) r += std::abs(off[i]);
    lo = std::min(lo, diag[i] - r);
  }
  return lo;
}

double SymTridiagonal::upper_bound() const {
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < size(); ++i) {
    double r = 0.0;
    if (i > 0) r += std::abs(off[i - 1]);
    if (i + 1 < size()) r += std::abs(off[i]);
    hi = std::max(hi, diag[i] + r);
  }
  return hi;
}

std::vector<double> solve_shifted(const SymTridiagonal& t, double shift, std::span<const double> b) {
  // Banded LU with partial pivoting; U has two super-diagonals after row swaps.
  const std::size_t n = t.size();
  std::vector<double> a(n), c(n, 0.0), d(n, 0.0), x(b.begin(), b.end());
  std::vector<double> sub(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = t.diag[i] - shift;
    if (i + 1 < n) {
      c[i] = t.off[i];
      sub[i] = t.off[i];
    }
  }
  const double eps = std::numeric_limits<double>::epsilon() * std::max(std::abs(t.upper_bound()), std::abs(t.lower_bound()));
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (std::abs(sub[i]) > std::abs(a[i])) {
      // swap rows i and i+1
      std::swap(a[i], sub[i]);
      std::swap(c[i], a[i + 1]);
      std::swap(d[i], c[i + 1]);
      std::swap(x[i], x[i + 1]);
    }
    if (a[i] == 0.0) a[i] = eps;
    const double m = sub[i] / a[i];
    a[i + 1] -= m * c[i];
    c[i + 1] -= m * d[i];
    x[i + 1] -= m * x[i];
  }
  if (a[n - 1] == 0.0) a[n - 1] = eps;
  for (std::size_t k = n; k-- > 0;) {
    double s = x[k];
    if (k + 1 < n) s -= c[k] * x[k + 1];
    if (k + 2 < n) s -= d[k] * x[k + 2];
    x[k] = s / a[k];
  }
  return x;
}

namespace {

double norm2(const std::vector<double>& v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

}  // namespace

TridiagonalEigen lowest_eigenpairs(const SymTridiagonal& t, std::size_t k, double tol) {
  const std::size_t n = t.size();
  require(k >= 1 && k <= n, ErrorCode::invalid_argument, "eigenpair count out of range");
  const double lo0 = t.lower_bound();
  const double hi0 = t.upper_bound();
  const double scale = std::max({std::abs(lo0), std::abs(hi0), 1.0});

  TridiagonalEigen out;
  out.values.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    double lo = lo0, hi = hi0;
    // invariant: count_below(lo) <= j < count_below(hi)
    for (int it = 0; it < 200 && hi - lo > 4 * std::numeric_limits<double>::epsilon() * scale; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (t.count_below(mid) > j) hi = mid; else lo = mid;
    }
    out.values[j] = 0.5 * (lo + hi);
  }

  std::vector<double> tv(n);
  for (std::size_t j = 0; j < k; ++j) {
    const double lam = out.values[j];
    std::vector<double> v(n);
    // deterministic, not orthogonal to any eigenvector in practice
    for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 + 0.1 * std::sin(1.7 * static_cast<double>(i) + 0.3 * static_cast<double>(j));
    double res = 0.0;
    for (int it = 0; it < 6; ++it) {
      // close eigenvalues: keep orthogonal to earlier vectors
      for (std::size_t p = 0; p < j; ++p) {
        if (std::abs(out.values[p] - lam) > 1e-6 * scale) continue;
        const double s = std::inner_product(v.begin(), v.end(), out.vectors[p].begin(), 0.0);
        for (std::size_t i = 0; i < n; ++i) v[i] -= s * out.vectors[p][i];
      }
      v = solve_shifted(t, lam, v);
      const double nv = norm2(v);
      if (!std::isfinite(nv) || nv == 0.0) throw Error(ErrorCode::eigensolver_failure, "inverse iteration breakdown");
      for (double& x : v) x /= nv;
      t.multiply(v, tv);
      res = 0.0;
      for (std::size_t i = 0; i < n; ++i) res += (tv[i] - lam * v[i]) * (tv[i] - lam * v[i]);
      res = std::sqrt(res);
      if (res <= 1e-3 * tol * scale && it >= 1) break;
    }
    if (res > tol * scale) throw Error(ErrorCode::eigensolver_failure, "inverse iteration did not converge");
    // sign convention: largest component positive
    auto big = std::max_element(v.begin(), v.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
    if (*big < 0) for (double& x : v) x = -x;
    out.max_residual = std::max(out.max_residual, res);
    out.vectors.push_back(std::move(v));
  }
  return out;
}

}  // namespace blowup
