#pragma once

#include <string>
#include <vector>

#include "blowup/ground_state.hpp"
#include "blowup/grid.hpp"

namespace blowup {

enum class CenterMode { momentum, centroid };
CenterMode center_mode_from_string(const std::string& s);
std::string to_string(CenterMode m);

struct ModulationOptions {
  CenterMode mode = CenterMode::momentum;
  double window = 12.0;       // comparison radius in Q units (|y| <= window)
  double max_lambda_h = 0.2;
  bool refine_center = true;  // one damped Newton step on <d_i Q^3, R~> = 0
};

/// u ~ e^{-i theta} lambda (Q + R)(lambda (x - x_c)). Norms are those of R(y) on |y| <= window,
/// evaluated on the native grid by the change of variables y = lambda (x - x_c).
struct ModulationFit {
  double lambda = 0.0;        // ||grad u|| / ||grad Q||
  double lambda_tilde = 0.0;  // ||grad |u| || / ||grad Q||
  Point x_center{};           // per mode (momentum: int |u|^2 x / ||Q||^2)
  Point x_momentum{};
  Point x_centroid{};
  Point x_refined{};          // modulus-fit centre after the Newton step
  double theta = 0.0;         // argmax Re <e^{i theta} u_rescaled, Q>

  // complex residual R = e^{i theta} u_rescaled - Q
  double residual_l2 = 0.0;
  double residual_h1 = 0.0;
  double lambda_residual_product = 0.0;
  double mass_identity_defect = 0.0;  // ||R||^2 + 2 <Q, Re R>
  double form_L_re = 0.0;             // <L Re R, Re R>
  double form_Lminus_im = 0.0;        // <L_- Im R, Im R>

  // modulus residual R~ = |u|_rescaled(lambda~) - Q about x_refined
  double mod_residual_l2 = 0.0;
  double mod_residual_h1 = 0.0;
  double mod_lambda_residual_product = 0.0;  // lambda * ||R~||_{H^1}
  double mod_form_L = 0.0;                   // <L R~, R~>
  double ortho_ratio = 0.0;  // max_i |<d_i Q^3, R~>| / (||R~|| ||d_i Q^3||)

  double rho = 0.0;  // lambda^2 int |u|^2 |x - x_c|^2
};

/// Throws core-unresolved when lambda h > max_lambda_h and off-domain-center when x_c is outside.
ModulationFit fit_modulation(const Field2D& u, const RadialProfile& p, const ModulationOptions& opts = {});

/// Residual of a fixed (theta, lambda, centre) on the complex field, for optimality checks.
double residual_l2_at(const Field2D& u, const RadialProfile& p, double lambda, Point center, double theta,
                      double window = 12.0);

struct DecayReport {
  double lambda_growth = 0.0;  // max lambda / min lambda
  double sup_product = 0.0;
  double min_product = 0.0;
  double band_ratio = 0.0;     // sup / min
  double trend = 0.0;          // slope of log(product) against log(lambda)
  bool bounded = false;        // band_ratio <= 2
};

/// sup_t lambda ||R||_{H^1} over the fits; `modulus` selects R~ (default) or the complex residual.
/// Throws insufficient-growth when lambda grows less than min_growth.
DecayReport residual_decay_check(const std::vector<ModulationFit>& fits, bool modulus = true,
                                 double min_growth = 10.0);

struct EquivirReport {
  std::vector<double> rho;
  double rho_min = 0.0;
  double rho_max = 0.0;
  double band_ratio = 0.0;
  bool within_band = false;  // ratio <= 10
};
EquivirReport equivir_check(const std::vector<ModulationFit>& fits);

struct BoundaryDistanceRow {
  double t = 0.0;
  double lambda_dist = 0.0;  // lambda * dist(x_c, boundary)
  double center_norm = 0.0;  // |x_c|
  double time_to_blowup = 0.0;
};
std::vector<BoundaryDistanceRow> boundary_distance_monitor(const std::vector<double>& times,
                                                           const std::vector<ModulationFit>& fits,
                                                           const DomainSpec& domain, double T_est);

/// max_t |x_momentum - x_centroid| lambda^2.
double momentum_centroid_gap(const std::vector<ModulationFit>& fits);

void write_modfit_csv(const std::vector<double>& times, const std::vector<ModulationFit>& fits,
                      const std::string& path);

}  // namespace blowup
