#pragma once

#include <array>
#include <functional>
#include <string>

#include "blowup/grid.hpp"

namespace blowup {

/// Radial profile F(r) with derivatives F, F', F'', F''', F''''.
using RadialJet = std::array<double, 5>;
using RadialFn = std::function<RadialJet(double r)>;

RadialJet jet_product(const RadialJet& a, const RadialJet& b);

/// Quintic smoothstep S(t) = 10t^3 - 15t^4 + 6t^5 on [0,1], 0 below, 1 above; jet in t.
RadialJet smoothstep_jet(double t);

/// Scalar weight h(x) with the derivatives the virial identities need.
struct Weight {
  std::string name;
  std::function<double(Point)> value;
  std::function<Point(Point)> grad;
  std::function<std::array<double, 3>(Point)> hessian;  // hxx, hxy, hyy
  std::function<double(Point)> bilaplacian;

  double laplacian(Point x) const {
    const auto hs = hessian(x);
    return hs[0] + hs[2];
  }

  /// h(x) = F(|x - center|). F must be even and quadratic near 0 (Delta^2 h = 0 at the centre).
  static Weight radial(std::string name, RadialFn F, Point center = {});
  /// |x - center|^2.
  static Weight quadratic(Point center = {});
  /// x_i - center_i.
  static Weight coordinate(int i, Point center = {});
  /// R^2 Psi(|x|/R): |x|^2 on B(0,R), C^3 transition on [R,2R], constant 16R^2/7 beyond.
  static Weight localized_square(double R, Point center = {});
  /// phi^2 |x|^2 with phi = 1 on B(0,R), quintic decay to 0 at 2R.
  static Weight cutoff_square(double R, Point center = {});
  /// Tail weight n phi(x/n): 0 on B(0,n), |x| beyond 2n, smooth in between.
  static Weight tail(double n, Point center = {});
};

}  // namespace blowup
