#include "blowup/weights.hpp"

#include <cmath>

#include "blowup/error.hpp"

namespace blowup {

RadialJet jet_product(const RadialJet& a, const RadialJet& b) {
  // Leibniz rule up to fourth order
  return {a[0] * b[0],
          a[1] * b[0] + a[0] * b[1],
          a[2] * b[0] + 2 * a[1] * b[1] + a[0] * b[2],
          a[3] * b[0] + 3 * a[2] * b[1] + 3 * a[1] * b[2] + a[0] * b[3],
          a[4] * b[0] + 4 * a[3] * b[1] + 6 * a[2] * b[2] + 4 * a[1] * b[3] + a[0] * b[4]};
}

RadialJet smoothstep_jet(double t) {
  if (t <= 0.0) return {0, 0, 0, 0, 0};
  if (t >= 1.0) return {1, 0, 0, 0, 0};
  const double t2 = t * t, t3 = t2 * t;
  return {t3 * (10 - 15 * t + 6 * t2),
          30 * t2 - 60 * t3 + 30 * t2 * t2,
          60 * t - 180 * t2 + 120 * t3,
          60 - 360 * t + 360 * t2,
          -360 + 720 * t};
}

namespace {

// jet of x -> f(x / s) scaled: d^k/dr^k f(r/s) = f^(k)(r/s) / s^k
RadialJet rescale(RadialJet j, double s) {
  double f = 1.0;
  for (int k = 1; k < 5; ++k) {
    f /= s;
    j[static_cast<std::size_t>(k)] *= f;
  }
  return j;
}

}  // namespace

Weight Weight::radial(std::string name, RadialFn F, Point center) {
  Weight w;
  w.name = std::move(name);
  const double tiny = 1e-9;
  w.value = [F, center](Point x) { return F(norm(x - center))[0]; };
  w.grad = [F, center, tiny](Point x) -> Point {
    const Point d = x - center;
    const double r = norm(d);
    if (r < tiny) return {0.0, 0.0};
    const double g = F(r)[1] / r;
    return {g * d.x, g * d.y};
  };
  w.hessian = [F, center, tiny](Point x) -> std::array<double, 3> {
    const Point d = x - center;
    const double r = norm(d);
    if (r < tiny) {
      const double c = F(0.0)[2];
      return {c, 0.0, c};
    }
    const auto j = F(r);
    const double a = j[2], b = j[1] / r;  // radial and tangential curvatures
    const double ex = d.x / r, ey = d.y / r;
    return {a * ex * ex + b * ey * ey, (a - b) * ex * ey, a * ey * ey + b * ex * ex};
  };
  w.bilaplacian = [F, center](Point x) {
    const double r = norm(x - center);
    if (r < 1e-6) return 0.0;  // F quadratic near the origin; the radial formula cancels there
    const auto j = F(r);
    return j[4] + 2 * j[3] / r - j[2] / (r * r) + j[1] / (r * r * r);
  };
  return w;
}

Weight Weight::quadratic(Point center) {
  Weight w;
  w.name = "quadratic";
  w.value = [center](Point x) {
    const Point d = x - center;
    return dot(d, d);
  };
  w.grad = [center](Point x) { return 2.0 * (x - center); };
  w.hessian = [](Point) { return std::array<double, 3>{2.0, 0.0, 2.0}; };
  w.bilaplacian = [](Point) { return 0.0; };
  return w;
}

Weight Weight::coordinate(int i, Point center) {
  require(i == 0 || i == 1, ErrorCode::invalid_argument, "coordinate index must be 0 or 1");
  Weight w;
  w.name = i == 0 ? "x" : "y";
  w.value = [i, center](Point x) { return i == 0 ? x.x - center.x : x.y - center.y; };
  w.grad = [i](Point) { return i == 0 ? Point{1.0, 0.0} : Point{0.0, 1.0}; };
  w.hessian = [](Point) { return std::array<double, 3>{0.0, 0.0, 0.0}; };
  w.bilaplacian = [](Point) { return 0.0; };
  return w;
}

Weight Weight::localized_square(double R, Point center) {
  require(R > 0.0, ErrorCode::invalid_argument, "radius must be positive");
  // Psi(s) = s^2 on [0,1]; s^2 - P(s-1) on [1,2] with P = 5t^4 - 2t^5 - 3t^6 + 12t^7/7,
  // which matches s^2 to third order at s = 1 and the constant 16/7 to third order at s = 2.
  auto Psi = [](double s) -> RadialJet {
    if (s <= 1.0) return {s * s, 2 * s, 2, 0, 0};
    if (s >= 2.0) return {16.0 / 7.0, 0, 0, 0, 0};
    const double t = s - 1.0, t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t, t6 = t5 * t, t7 = t6 * t;
    const RadialJet P{5 * t4 - 2 * t5 - 3 * t6 + 12.0 / 7.0 * t7,
                      20 * t3 - 10 * t4 - 18 * t5 + 12 * t6,
                      60 * t2 - 40 * t3 - 90 * t4 + 72 * t5,
                      120 * t - 120 * t2 - 360 * t3 + 360 * t4,
                      120 - 240 * t - 1080 * t2 + 1440 * t3};
    return {s * s - P[0], 2 * s - P[1], 2 - P[2], -P[3], -P[4]};
  };
  return radial(
      "localized_square",
      [Psi, R](double r) {
        RadialJet j = rescale(Psi(r / R), R);
        for (double& v : j) v *= R * R;
        return j;
      },
      center);
}

Weight Weight::cutoff_square(double R, Point center) {
  require(R > 0.0, ErrorCode::invalid_argument, "radius must be positive");
  return radial(
      "cutoff_square",
      [R](double r) {
        RadialJet s = rescale(smoothstep_jet(r / R - 1.0), R);
        const RadialJet phi{1.0 - s[0], -s[1], -s[2], -s[3], -s[4]};
        const RadialJet r2{r * r, 2 * r, 2, 0, 0};
        return jet_product(jet_product(phi, phi), r2);
      },
      center);
}

Weight Weight::tail(double n, Point center) {
  require(n > 0.0, ErrorCode::invalid_argument, "tail index must be positive");
  return radial(
      "tail",
      [n](double r) {
        const RadialJet s = rescale(smoothstep_jet(r / n - 1.0), n);
        const RadialJet lin{r, 1, 0, 0, 0};
        return jet_product(s, lin);
      },
      center);
}

}  // namespace blowup
