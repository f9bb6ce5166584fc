#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace blowup {

/// Symmetric tridiagonal matrix: diag[0..n), off[0..n-1) with off[i] = T(i, i+1).
struct SymTridiagonal {
  std::vector<double> diag;
  std::vector<double> off;

  std::size_t size() const { return diag.size(); }
  void multiply(std::span<const double> x, std::span<double> y) const;
  /// Number of eigenvalues strictly below x (Sturm sequence).
  std::size_t count_below(double x) const;
  /// Gershgorin interval.
  double lower_bound() const;
  double upper_bound() const;
};

struct TridiagonalEigen {
  std::vector<double> values;                // ascending
  std::vector<std::vector<double>> vectors;  // unit Euclidean norm
  double max_residual = 0.0;                 // max ||T v - lambda v||
};

/// The k smallest eigenpairs by bisection on the Sturm count and inverse iteration.
/// Throws eigensolver-non-convergence when an eigenvector residual stays above tol * scale.
TridiagonalEigen lowest_eigenpairs(const SymTridiagonal& t, std::size_t k, double tol = 1e-9);

/// Solves (T - shift) x = b by Gaussian elimination with partial pivoting.
std::vector<double> solve_shifted(const SymTridiagonal& t, double shift, std::span<const double> b);

}  // namespace blowup
