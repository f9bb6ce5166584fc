#include <doctest.h>

#include <filesystem>

#include "blowup/error.hpp"
#include "blowup/exact_solutions.hpp"
#include "blowup/field_io.hpp"
#include "support.hpp"

using namespace blowup;
using test::Q;

TEST_CASE("laplacian") {
  SUBCASE("discrete eigenfunction of the rectangle") {
    // sin(pi x / L) sin(pi y / L) on [0,L]^2 is an exact eigenvector of the five-point stencil
    const double L = 2.0, h = L / 40.0;
    const GridPtr g = make_grid(DomainSpec::rectangle(L, L), h);
    const Field2D f = Field2D::sample(g, [&](double x, double y) { return std::sin(M_PI * x / L) * std::sin(M_PI * y / L); });
    const double mu = 2.0 * (4.0 / (h * h)) * std::pow(std::sin(M_PI * h / (2.0 * L)), 2);
    Field2D r = laplacian(f);
    r += (mu * f);
    CHECK(std::sqrt(mass(r) / mass(f)) <= 1e-10);
    // Dirichlet form equals <-Lap f, f>
    CHECK(grad_norm_sq(f) == doctest::Approx(-inner_real(laplacian(f), f)).epsilon(1e-12));
  }
  SUBCASE("zero field") {
    const GridPtr g = make_grid(DomainSpec::disc(3.0), 0.1);
    CHECK(mass(laplacian(Field2D(g))) == 0.0);
  }
  SUBCASE("ground-state residual is second order") {
    double prev = 0.0;
    for (double h : {0.1, 0.05}) {
      const GridPtr g = make_grid(DomainSpec::rectangle(24.0, 24.0, {-12.0, -12.0}), h);
      const Field2D q = sample_profile(Q(), g);
      // -Lap Q + Q - Q^3 = 0
      Field2D r = laplacian(q);
      r -= q;
      r += Field2D::sample(g, [&](double x, double y) { return std::pow(Q().value(std::hypot(x, y)), 3); });
      const double res = std::sqrt(mass(r));
      if (prev > 0.0) CHECK(prev / res == doctest::Approx(4.0).epsilon(0.15));
      prev = res;
    }
  }
}

TEST_CASE("quadrature and gradient") {
  SUBCASE("area of a disc within one boundary layer") {
    const double R = 3.0, h = 0.05;
    const GridPtr g = make_grid(DomainSpec::disc(R), h);
    const double area = integrate(*g, [](std::size_t, Point) { return 1.0; });
    CHECK(std::abs(area - M_PI * R * R) <= 2.0 * h * 2.0 * M_PI * R);
  }
  SUBCASE("linear functions differentiate exactly away from the boundary") {
    const GridPtr g = make_grid(DomainSpec::rectangle(2.0, 2.0, {-1.0, -1.0}), 0.1);
    const Field2D f = Field2D::sample(g, [](double x, double y) { return cplx(2.0 * x - 3.0 * y, x); });
    const Gradient d = gradient(f);
    double worst = 0.0;
    for (std::size_t j = 0; j < g->ny(); ++j)
      for (std::size_t i = 0; i < g->nx(); ++i) {
        const Point p = g->node(i, j);
        if (std::max(std::abs(p.x), std::abs(p.y)) > 0.85) continue;
        worst = std::max(worst, std::abs(d.dx(i, j) - cplx(2.0, 1.0)));
        worst = std::max(worst, std::abs(d.dy(i, j) - cplx(-3.0, 0.0)));
      }
    CHECK(worst <= 1e-12);
  }
  SUBCASE("summation by parts") {
    std::mt19937_64 rng(11);
    const GridPtr g = make_grid(DomainSpec::half_disc(4.0), 0.1);
    const Field2D a = test::random_gaussians(g, rng, {-2, 0.5}, {2, 3}, 0.5);
    const Field2D b = test::random_gaussians(g, rng, {-2, 0.5}, {2, 3}, 0.5);
    const cplx lhs = inner(laplacian(a), b), rhs = inner(a, laplacian(b));
    CHECK(std::abs(lhs - rhs) <= 1e-11 * std::abs(lhs));
  }
  SUBCASE("interpolation reproduces bilinear data") {
    const GridPtr g = make_grid(DomainSpec::rectangle(2.0, 2.0, {-1.0, -1.0}), 0.1);
    const Field2D f = Field2D::sample(g, [](double x, double y) { return 1.0 + x + 2.0 * y + x * y; });
    const Point p{0.123, -0.377};
    CHECK(std::abs(interpolate(f, p) - cplx(1.0 + p.x + 2.0 * p.y + p.x * p.y)) <= 1e-12);
  }
}

TEST_CASE("boundary geometry") {
  SUBCASE("boundary normals are unit and outward") {
    const double s3 = std::sqrt(3.0);
    const std::vector<std::pair<DomainSpec, std::vector<Point>>> cases = {
        {DomainSpec::disc(2.0, {0.5, 0.0}), {}},
        {DomainSpec::half_disc(2.0), {{-2, 0}, {2, 0}}},
        {DomainSpec::sector(M_PI / 3, 2.0), {{0, 0}, {2, 0}, {1, s3}}},
        {DomainSpec::rectangle(2.0, 1.0), {{0, 0}, {2, 0}, {0, 1}, {2, 1}}}};
    for (const auto& [d, corners] : cases) {
      const GridPtr g = make_grid(d, 0.05);
      double arc = 0.0;
      for (const BoundaryPoint& b : g->boundary()) {
        CHECK(std::abs(norm(b.normal) - 1.0) <= 1e-12);
        CHECK(!d.contains(b.position + 1e-6 * b.normal));
        // stepping inward lands inside except exactly at a corner
        const bool corner = std::any_of(corners.begin(), corners.end(), [&](Point c) { return norm(c - b.position) < 1e-9; });
        if (!corner) CHECK(d.contains(b.position - 1e-6 * b.normal));
        arc += b.weight;
      }
      CHECK(arc > 0.0);
    }
  }
  SUBCASE("perimeter quadrature") {
    const GridPtr g = make_grid(DomainSpec::disc(2.0), 0.05);
    std::vector<double> one(g->boundary().size(), 1.0);
    CHECK(boundary_integral(*g, one) == doctest::Approx(4.0 * M_PI).epsilon(1e-3));
  }
  SUBCASE("normal derivative of y on the flat edge of a half disc") {
    const GridPtr g = make_grid(DomainSpec::half_disc(2.0), 0.05);
    const Field2D f = Field2D::sample(g, [](double, double y) { return y; });
    int flat = 0;
    for (const BoundaryPoint& b : g->boundary()) {
      if (!b.straight_edge || std::abs(b.position.x) > 1.5) continue;
      ++flat;
      CHECK(normal_derivative_at(f, b).re == doctest::Approx(-1.0).epsilon(1e-9));
    }
    CHECK(flat > 10);
  }
  SUBCASE("normal derivative of the first Dirichlet mode") {
    const double L = 2.0;
    const GridPtr g = make_grid(DomainSpec::rectangle(L, L), L / 80.0);
    const Field2D f = Field2D::sample(g, [&](double x, double y) { return std::sin(M_PI * x / L) * std::sin(M_PI * y / L); });
    for (const BoundaryPoint& b : g->boundary()) {
      const Point p = b.position;
      const double exact = (M_PI / L) * (std::abs(p.x) < 1e-9 || std::abs(p.x - L) < 1e-9 ? std::sin(M_PI * p.y / L)
                                                                                            : std::sin(M_PI * p.x / L));
      CHECK(std::abs(-normal_derivative_at(f, b).re - exact) <= 5e-3);
    }
  }
  SUBCASE("explicit-family data is flat at a distant boundary") {
    const GridPtr g = make_grid(DomainSpec::disc(6.0), 1.0 / 32.0);
    const Field2D u = explicit_blowup({0.25, 1.0, {}}, Q(), 0.0, g);
    std::vector<double> dn2;
    for (const NormalDerivative& d : boundary_normal_derivative(u)) dn2.push_back(d.abs_sq());
    CHECK(boundary_integral(*g, dn2) <= 1e-8);
  }
  SUBCASE("straight edges through the origin") {
    CHECK(sector_geometry_check(DomainSpec::half_disc(3.0)));
    CHECK(sector_geometry_check(DomainSpec::sector(M_PI / 3, 3.0)));
    CHECK_FALSE(sector_geometry_check(DomainSpec::rectangle(2.0, 2.0, {-1.0, -1.0})));
  }
}

TEST_CASE("node classification") {
  const GridPtr g = make_grid(DomainSpec::sector(3 * M_PI / 2, 2.0), 0.1);
  CHECK(g->interior_count() + g->boundary_node_count() + g->exterior_count() == g->size());
  for (std::size_t k : g->interior_nodes()) CHECK(g->domain().contains(g->node(k % g->nx(), k / g->nx())));

  // a mask domain built from the interior bits reproduces the same interior set
  std::vector<std::uint8_t> bits(g->interior_mask().begin(), g->interior_mask().end());
  const GridPtr gm = make_grid(DomainSpec::mask(g->nx(), g->ny(), g->h(), g->origin(), bits), g->h());
  CHECK(gm->interior_count() == g->interior_count());
  CHECK(std::equal(gm->interior_nodes().begin(), gm->interior_nodes().end(), g->interior_nodes().begin()));
}

TEST_CASE("domain validation") {
  CHECK_THROWS_AS(DomainSpec::disc(-1.0).validate(), Error);
  CHECK_THROWS_AS(DomainSpec::rectangle(0.0, 1.0).validate(), Error);
  CHECK_THROWS_AS(DomainSpec::sector(7.0, 1.0).validate(), Error);
  CHECK_THROWS_AS(make_grid(DomainSpec::disc(1.0), 0.0), Error);
  CHECK_THROWS_AS(DomainSpec::mask(3, 3, 0.1, {}, {1, 1}).validate(), Error);
  CHECK(domain_kind_from_string(to_string(DomainKind::half_disc)) == DomainKind::half_disc);
}

TEST_CASE("field files") {
  const auto dir = std::filesystem::temp_directory_path();
  const GridPtr g = make_grid(DomainSpec::disc(2.0), 0.1);
  std::mt19937_64 rng(5);
  const Field2D f = test::random_gaussians(g, rng, {-1, -1}, {1, 1}, 0.4);
  const std::string path = (dir / "blowup_field_test.bin").string();
  write_field(f, path);
  const Field2D r = read_field(path, g);
  for (std::size_t k = 0; k < g->size(); ++k) CHECK(r.at(k) == f.at(k));
  const FieldFile ff = read_field_file(path);
  CHECK(ff.nx == g->nx());
  CHECK(ff.h == g->h());

  const GridPtr other = make_grid(DomainSpec::disc(2.0), 0.05);
  CHECK_THROWS_AS(read_field(path, other), Error);
  CHECK_THROWS_AS(read_field((dir / "no_such_field.bin").string(), g), Error);
  std::filesystem::remove(path);
}
