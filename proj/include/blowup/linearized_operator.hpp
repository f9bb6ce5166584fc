#pragma once

#include <string>
#include <vector>

#include "blowup/ground_state.hpp"
#include "blowup/grid.hpp"
#include "blowup/tridiagonal.hpp"

namespace blowup {

/// Which potential multiplies f: L uses 1 - 3Q^2, L_minus uses 1 - Q^2,
/// L_minus_literal is the 1 - Q form kept for comparison.
enum class OperatorVariant { L, L_minus, L_minus_literal };

std::string to_string(OperatorVariant v);

/// -f'' - f'/r + m^2/r^2 f + V f on cell-centred radii r_j = (j - 1/2) h, Dirichlet at r_max.
struct AngularModeOperator {
  int m = 0;
  std::vector<double> r_grid;
  std::vector<double> potential;
  double h = 0.0;
  OperatorVariant variant = OperatorVariant::L;

  double r_max() const { return h * static_cast<double>(r_grid.size()); }
  /// Symmetric form S = W^{1/2} A W^{-1/2}, W = diag(r_j).
  SymTridiagonal symmetrized() const;
  /// A f on the radial grid (non-symmetric form).
  std::vector<double> apply(const std::vector<double>& f) const;
};

AngularModeOperator make_mode_operator(const RadialProfile& p, int m, double h, double r_max,
                                       OperatorVariant variant = OperatorVariant::L);

struct ModeSpectrum {
  int m = 0;
  std::vector<double> eigenvalues;                // ascending
  std::vector<std::vector<double>> eigenvectors;  // f(r_j), normalised so sum f^2 r h = 1
};

struct SpectrumReport {
  OperatorVariant variant = OperatorVariant::L;
  double h = 0.0;
  double r_max = 0.0;
  std::vector<ModeSpectrum> modes;
  double kernel_tol = 0.0;
  /// Eigenvalues with |lambda| <= kernel_tol, modes m >= 1 counted twice (cos and sin).
  int kernel_dimension_estimate = 0;
};

/// -Delta f + (1 - 3Q^2) f with Q centred at `center`. Throws grid-too-coarse for h > 0.1.
Field2D apply_L(const RadialProfile& p, const Field2D& f, Point center = {});
/// -Delta f + (1 - Q^2) f.
Field2D apply_L_minus(const RadialProfile& p, const Field2D& f, Point center = {});

/// k smallest eigenpairs of one angular mode. Requires k >= 3 and r_max >= 15.
ModeSpectrum mode_eigenpairs(const AngularModeOperator& op, int k);

/// 10 h^2 max|V|.
double kernel_tolerance(const AngularModeOperator& op);

SpectrumReport compute_spectrum(const RadialProfile& p, int max_mode, int k, double h, double r_max,
                                OperatorVariant variant = OperatorVariant::L);

enum class ConstraintSet { none, q_only, full };

struct CoercivityOptions {
  double h = 0.02;
  double r_max = 15.0;
  int max_mode = 4;
  int n_iter = 4000;
  double tol = 1e-12;
  ConstraintSet constraints = ConstraintSet::full;
};

struct CoercivityResult {
  double I = 0.0;
  std::vector<double> per_mode;  // constrained minimum for m = 0..max_mode
  int minimizing_mode = 0;
  int iterations = 0;
  bool converged = false;
};

/// min <Lf, f>/||f||^2 over f orthogonal to {Q, d1 Q^3, d2 Q^3} by projected inverse iteration,
/// mode by mode: m = 0 orthogonal to Q, m = 1 orthogonal to (Q^3)', higher modes free.
CoercivityResult constrained_coercivity(const RadialProfile& p, const CoercivityOptions& opts = {});

/// Lowest eigenvalue of the mode operator restricted to the complement of the given
/// radial constraint vectors (weighted inner product sum f g r h).
/// Throws projector-rank-deficient when the constraints are numerically dependent.
double projected_lowest(const AngularModeOperator& op, const std::vector<std::vector<double>>& constraints,
                        int n_iter, double tol, int* iterations = nullptr, bool* converged = nullptr);

struct MarisViolation {
  double U = 0.0;
  double u = 0.0;
  double value = 0.0;
};

struct MarisReport {
  int n_U = 0;
  int n_u = 0;
  std::vector<MarisViolation> violations;
  double integral_G = 0.0;       // int G(Q) dx, G(s) = s^2/2 - s^4/4
  double integral_G_rel = 0.0;   // divided by ||Q||_2^2
  double q0_margin = 0.0;        // Q(0) - sqrt(2)
  bool sign_conditions = false;
  bool integral_ok = false;      // |int G| <= 1e-4 ||Q||^2
  bool ok() const { return sign_conditions && integral_ok && q0_margin > 0.0; }
};

/// Hypotheses of the uniqueness theorem for g(s) = s - s^3, a0 = 1, lambda(U) = 1 - 1/U^2.
MarisReport maris_hypothesis_check(const RadialProfile& p, int n_U = 200, int n_u = 400);

}  // namespace blowup
