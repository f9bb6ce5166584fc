#include "blowup/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "blowup/error.hpp"

namespace blowup {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double polar_angle(Point d) {
  double a = std::atan2(d.y, d.x);
  if (a < 0.0) a += kTwoPi;
  return a;
}

double distance_to_segment(Point p, Point a, Point b) {
  const Point ab = b - a;
  const double len2 = dot(ab, ab);
  double s = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  s = std::clamp(s, 0.0, 1.0);
  return norm(p - (a + s * ab));
}

void add_segment(std::vector<BoundaryPoint>& out, Point a, Point b, Point normal, double h) {
  const double len = norm(b - a);
  const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(len / h)));
  const double w = len / static_cast<double>(n);
  for (std::size_t k = 0; k <= n; ++k) {
    const double s = static_cast<double>(k) / static_cast<double>(n);
    const double weight = (k == 0 || k == n) ? 0.5 * w : w;
    out.push_back({a + s * (b - a), normal, weight, true});
  }
}

void add_arc(std::vector<BoundaryPoint>& out, Point c, double r, double a0, double a1, double h,
             bool closed) {
  const double len = r * (a1 - a0);
  const auto n = std::max<std::size_t>(closed ? 8 : 1, static_cast<std::size_t>(std::lround(len / h)));
  const double w = len / static_cast<double>(n);
  const std::size_t last = closed ? n - 1 : n;
  for (std::size_t k = 0; k <= last; ++k) {
    const double a = a0 + (a1 - a0) * static_cast<double>(k) / static_cast<double>(n);
    const Point nu{std::cos(a), std::sin(a)};
    const double weight = (!closed && (k == 0 || k == n)) ? 0.5 * w : w;
    out.push_back({c + r * nu, nu, weight, false});
  }
}

// Analytic boundary sampling with spacing ~h.
std::vector<BoundaryPoint> analytic_boundary(const DomainSpec& d, double h) {
  std::vector<BoundaryPoint> out;
  const Point o = d.origin;
  switch (d.kind) {
    case DomainKind::rectangle: {
      const Point p00 = o, p10 = o + Point{d.width, 0.0}, p11 = o + Point{d.width, d.height},
                  p01 = o + Point{0.0, d.height};
      add_segment(out, p00, p10, {0.0, -1.0}, h);
      add_segment(out, p10, p11, {1.0, 0.0}, h);
      add_segment(out, p11, p01, {0.0, 1.0}, h);
      add_segment(out, p01, p00, {-1.0, 0.0}, h);
      break;
    }
    case DomainKind::disc:
      add_arc(out, o, d.radius, 0.0, kTwoPi, h, true);
      break;
    case DomainKind::half_disc:
      add_segment(out, o + Point{-d.radius, 0.0}, o + Point{d.radius, 0.0}, {0.0, -1.0}, h);
      add_arc(out, o, d.radius, 0.0, std::numbers::pi, h, false);
      break;
    case DomainKind::sector: {
      const Point e0{1.0, 0.0};
      const Point e1{std::cos(d.angle), std::sin(d.angle)};
      add_segment(out, o, o + d.radius * e0, {0.0, -1.0}, h);
      add_segment(out, o, o + d.radius * e1, {-e1.y, e1.x}, h);
      add_arc(out, o, d.radius, 0.0, d.angle, h, false);
      break;
    }
    case DomainKind::mask:
      break;
  }
  return out;
}

}  // namespace

double norm(Point a) { return std::hypot(a.x, a.y); }

std::string to_string(DomainKind kind) {
  switch (kind) {
    case DomainKind::rectangle: return "rectangle";
    case DomainKind::disc: return "disc";
    case DomainKind::sector: return "sector";
    case DomainKind::half_disc: return "half_disc";
    case DomainKind::mask: return "mask";
  }
  return "unknown";
}

DomainKind domain_kind_from_string(const std::string& name) {
  if (name == "rectangle") return DomainKind::rectangle;
  if (name == "disc") return DomainKind::disc;
  if (name == "sector") return DomainKind::sector;
  if (name == "half_disc") return DomainKind::half_disc;
  if (name == "mask") return DomainKind::mask;
  throw Error(ErrorCode::invalid_argument, "unknown domain kind '" + name + "'");
}

DomainSpec DomainSpec::rectangle(double width, double height, Point lower_left) {
  DomainSpec d;
  d.kind = DomainKind::rectangle;
  d.width = width;
  d.height = height;
  d.origin = lower_left;
  d.validate();
  return d;
}

DomainSpec DomainSpec::disc(double radius, Point center) {
  DomainSpec d;
  d.kind = DomainKind::disc;
  d.radius = radius;
  d.origin = center;
  d.validate();
  return d;
}

DomainSpec DomainSpec::sector(double angle, double radius, Point vertex) {
  DomainSpec d;
  d.kind = DomainKind::sector;
  d.angle = angle;
  d.radius = radius;
  d.origin = vertex;
  d.validate();
  return d;
}

DomainSpec DomainSpec::half_disc(double radius, Point center) {
  DomainSpec d;
  d.kind = DomainKind::half_disc;
  d.radius = radius;
  d.origin = center;
  d.validate();
  return d;
}

DomainSpec DomainSpec::mask(std::size_t nx, std::size_t ny, double h, Point origin,
                            std::vector<std::uint8_t> bits) {
  DomainSpec d;
  d.kind = DomainKind::mask;
  d.mask_nx = nx;
  d.mask_ny = ny;
  d.mask_h = h;
  d.origin = origin;
  d.mask_bits = std::move(bits);
  d.validate();
  return d;
}

void DomainSpec::validate() const {
  switch (kind) {
    case DomainKind::rectangle:
      require(width > 0.0 && height > 0.0, ErrorCode::invalid_argument, "rectangle widths must be > 0");
      break;
    case DomainKind::disc:
    case DomainKind::half_disc:
      require(radius > 0.0, ErrorCode::invalid_argument, "radius must be > 0");
      break;
    case DomainKind::sector:
      require(radius > 0.0, ErrorCode::invalid_argument, "radius must be > 0");
      require(angle > 0.0 && angle < kTwoPi, ErrorCode::invalid_argument, "sector angle must lie in (0, 2pi)");
      break;
    case DomainKind::mask: {
      require(mask_nx >= 3 && mask_ny >= 3 && mask_h > 0.0, ErrorCode::invalid_argument,
              "mask needs nx, ny >= 3 and h > 0");
      require(mask_bits.size() == mask_nx * mask_ny, ErrorCode::invalid_argument, "mask size mismatch");
      for (std::size_t j = 0; j < mask_ny; ++j) {
        for (std::size_t i = 0; i < mask_nx; ++i) {
          const bool edge = i == 0 || j == 0 || i + 1 == mask_nx || j + 1 == mask_ny;
          require(!(edge && mask_bits[j * mask_nx + i]), ErrorCode::invalid_argument,
                  "mask interior touches the lattice edge");
        }
      }
      break;
    }
  }
}

bool DomainSpec::contains(Point p) const {
  constexpr double eps = 1e-12;
  const Point d = p - origin;
  switch (kind) {
    case DomainKind::rectangle:
      return d.x > eps && d.x < width - eps && d.y > eps && d.y < height - eps;
    case DomainKind::disc:
      return norm(d) < radius - eps;
    case DomainKind::half_disc:
      return d.y > eps && norm(d) < radius - eps;
    case DomainKind::sector: {
      const double r = norm(d);
      if (r <= eps || r >= radius - eps) return false;
      const double a = polar_angle(d);
      return a > eps && a < angle - eps;
    }
    case DomainKind::mask: {
      const double fi = d.x / mask_h, fj = d.y / mask_h;
      const long i = std::lround(fi), j = std::lround(fj);
      if (std::abs(fi - static_cast<double>(i)) > 0.5 || i < 0 || j < 0) return false;
      if (static_cast<std::size_t>(i) >= mask_nx || static_cast<std::size_t>(j) >= mask_ny) return false;
      return mask_bits[static_cast<std::size_t>(j) * mask_nx + static_cast<std::size_t>(i)] != 0;
    }
  }
  return false;
}

double DomainSpec::boundary_distance(Point p) const {
  if (!contains(p)) return 0.0;
  const Point d = p - origin;
  switch (kind) {
    case DomainKind::rectangle:
      return std::min({d.x, width - d.x, d.y, height - d.y});
    case DomainKind::disc:
      return radius - norm(d);
    case DomainKind::half_disc:
      return std::min(d.y, radius - norm(d));
    case DomainKind::sector: {
      const Point e1{std::cos(angle), std::sin(angle)};
      return std::min({radius - norm(d), distance_to_segment(d, {}, Point{radius, 0.0}),
                       distance_to_segment(d, {}, radius * e1)});
    }
    case DomainKind::mask: {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < mask_ny; ++j) {
        for (std::size_t i = 0; i < mask_nx; ++i) {
          if (mask_bits[j * mask_nx + i]) continue;
          const Point q{origin.x + static_cast<double>(i) * mask_h, origin.y + static_cast<double>(j) * mask_h};
          best = std::min(best, norm(p - q));
        }
      }
      return best;
    }
  }
  return 0.0;
}

Grid2D::Grid2D(DomainSpec domain, double h) : domain_(std::move(domain)), h_(h) {
  domain_.validate();
  require(h > 0.0, ErrorCode::invalid_argument, "grid spacing must be > 0");

  if (domain_.kind == DomainKind::mask) {
    require(std::abs(domain_.mask_h - h) <= 1e-12 * h, ErrorCode::invalid_argument,
            "mask domains use their own spacing");
    nx_ = domain_.mask_nx;
    ny_ = domain_.mask_ny;
    origin_ = domain_.origin;
  } else {
    // Bounding box, then a lattice aligned with the domain origin and two spare layers.
    double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
    const Point o = domain_.origin;
    switch (domain_.kind) {
      case DomainKind::rectangle:
        xmin = o.x; xmax = o.x + domain_.width; ymin = o.y; ymax = o.y + domain_.height;
        break;
      case DomainKind::disc:
        xmin = o.x - domain_.radius; xmax = o.x + domain_.radius;
        ymin = o.y - domain_.radius; ymax = o.y + domain_.radius;
        break;
      case DomainKind::half_disc:
        xmin = o.x - domain_.radius; xmax = o.x + domain_.radius; ymin = o.y; ymax = o.y + domain_.radius;
        break;
      case DomainKind::sector: {
        xmin = xmax = o.x;
        ymin = ymax = o.y;
        const int samples = 720;
        for (int k = 0; k <= samples; ++k) {
          const double a = domain_.angle * k / samples;
          const Point q = o + domain_.radius * Point{std::cos(a), std::sin(a)};
          xmin = std::min(xmin, q.x); xmax = std::max(xmax, q.x);
          ymin = std::min(ymin, q.y); ymax = std::max(ymax, q.y);
        }
        for (int quarter = 0; quarter < 4; ++quarter) {
          const double a = quarter * std::numbers::pi / 2;
          if (a < domain_.angle) {
            const Point q = o + domain_.radius * Point{std::cos(a), std::sin(a)};
            xmin = std::min(xmin, q.x); xmax = std::max(xmax, q.x);
            ymin = std::min(ymin, q.y); ymax = std::max(ymax, q.y);
          }
        }
        break;
      }
      case DomainKind::mask:
        break;
    }
    const long i0 = static_cast<long>(std::floor((xmin - o.x) / h_ + 1e-9)) - 2;
    const long i1 = static_cast<long>(std::ceil((xmax - o.x) / h_ - 1e-9)) + 2;
    const long j0 = static_cast<long>(std::floor((ymin - o.y) / h_ + 1e-9)) - 2;
    const long j1 = static_cast<long>(std::ceil((ymax - o.y) / h_ - 1e-9)) + 2;
    nx_ = static_cast<std::size_t>(i1 - i0 + 1);
    ny_ = static_cast<std::size_t>(j1 - j0 + 1);
    origin_ = {o.x + static_cast<double>(i0) * h_, o.y + static_cast<double>(j0) * h_};
  }

  mask_.assign(nx_ * ny_, 0);
  for (std::size_t j = 1; j + 1 < ny_; ++j) {
    for (std::size_t i = 1; i + 1 < nx_; ++i) {
      if (domain_.kind == DomainKind::mask) {
        mask_[index(i, j)] = domain_.mask_bits[index(i, j)] ? 1 : 0;
      } else {
        mask_[index(i, j)] = domain_.contains(node(i, j)) ? 1 : 0;
      }
    }
  }
  for (std::size_t k = 0; k < mask_.size(); ++k) {
    if (mask_[k]) interior_nodes_.push_back(k);
  }
  for (std::size_t j = 0; j < ny_; ++j) {
    for (std::size_t i = 0; i < nx_; ++i) {
      if (interior(i, j)) continue;
      const bool adj = (i > 0 && interior(i - 1, j)) || (i + 1 < nx_ && interior(i + 1, j)) ||
                       (j > 0 && interior(i, j - 1)) || (j + 1 < ny_ && interior(i, j + 1));
      if (adj) ++boundary_node_count_;
    }
  }

  if (domain_.kind == DomainKind::mask) {
    const int di[4] = {1, -1, 0, 0};
    const int dj[4] = {0, 0, 1, -1};
    for (std::size_t k : interior_nodes_) {
      const std::size_t i = k % nx_, j = k / nx_;
      for (int d = 0; d < 4; ++d) {
        const std::size_t ni = i + di[d], nj = j + dj[d];
        if (!interior(ni, nj)) {
          boundary_.push_back({node(ni, nj), Point{double(di[d]), double(dj[d])}, h_, false});
        }
      }
    }
  } else {
    boundary_ = analytic_boundary(domain_, h_);
  }
}

GridPtr make_grid(const DomainSpec& domain, double h) { return std::make_shared<const Grid2D>(domain, h); }

// Field2D -------------------------------------------------------------------

Field2D::Field2D(GridPtr grid) : grid_(std::move(grid)), values_(grid_->size(), cplx(0.0, 0.0)) {}

Field2D::Field2D(GridPtr grid, std::vector<cplx> values) : grid_(std::move(grid)), values_(std::move(values)) {
  require(values_.size() == grid_->size(), ErrorCode::invalid_argument, "field size does not match grid");
  enforce_dirichlet();
}

void Field2D::enforce_dirichlet() {
  const auto mask = grid_->interior_mask();
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (!mask[k]) values_[k] = 0.0;
  }
}

Field2D& Field2D::operator*=(cplx s) {
  for (auto& v : values_) v *= s;
  return *this;
}

Field2D& Field2D::operator+=(const Field2D& other) {
  require(other.grid_.get() == grid_.get(), ErrorCode::invalid_argument, "fields live on different grids");
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += other.values_[k];
  return *this;
}

Field2D& Field2D::operator-=(const Field2D& other) {
  require(other.grid_.get() == grid_.get(), ErrorCode::invalid_argument, "fields live on different grids");
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= other.values_[k];
  return *this;
}

Field2D operator-(Field2D a, const Field2D& b) { return a -= b; }
Field2D operator*(cplx s, Field2D a) { return a *= s; }

Field2D modulus(const Field2D& f) {
  Field2D out(f.grid_ptr());
  auto dst = out.values();
  const auto src = f.values();
  for (std::size_t k = 0; k < src.size(); ++k) dst[k] = std::abs(src[k]);
  return out;
}

// Discrete calculus -----------------------------------------------------------

Field2D laplacian(const Field2D& f) {
  const Grid2D& g = f.grid();
  Field2D out(f.grid_ptr());
  const auto in = f.values();
  auto dst = out.values();
  const std::size_t nx = g.nx();
  const double inv_h2 = 1.0 / (g.h() * g.h());
  for (std::size_t k : g.interior_nodes()) {
    dst[k] = (in[k - 1] + in[k + 1] + in[k - nx] + in[k + nx] - 4.0 * in[k]) * inv_h2;
  }
  return out;
}

double integrate(const Grid2D& grid, std::span<const double> nodal) {
  require(nodal.size() == grid.size(), ErrorCode::invalid_argument, "nodal array size mismatch");
  double s = 0.0;
  for (std::size_t k : grid.interior_nodes()) s += nodal[k];
  return s * grid.h() * grid.h();
}

double integrate(const Grid2D& grid, const std::function<double(std::size_t, Point)>& fn) {
  double s = 0.0;
  for (std::size_t k : grid.interior_nodes()) s += fn(k, grid.node(k % grid.nx(), k / grid.nx()));
  return s * grid.h() * grid.h();
}

double mass(const Field2D& f) {
  double s = 0.0;
  const auto v = f.values();
  for (std::size_t k : f.grid().interior_nodes()) s += std::norm(v[k]);
  return s * f.grid().h() * f.grid().h();
}

double l4_fourth(const Field2D& f) {
  double s = 0.0;
  const auto v = f.values();
  for (std::size_t k : f.grid().interior_nodes()) {
    const double a = std::norm(v[k]);
    s += a * a;
  }
  return s * f.grid().h() * f.grid().h();
}

double grad_norm_sq(const Field2D& f) {
  // Every edge touching an interior node, counted once; the h^2 weight cancels 1/h^2.
  const Grid2D& g = f.grid();
  const auto v = f.values();
  const auto mask = g.interior_mask();
  const std::size_t nx = g.nx();
  double s = 0.0;
  for (std::size_t k : g.interior_nodes()) {
    s += std::norm(v[k + 1] - v[k]) + std::norm(v[k + nx] - v[k]);
    if (!mask[k - 1]) s += std::norm(v[k]);
    if (!mask[k - nx]) s += std::norm(v[k]);
  }
  return s;
}

double inner_real(const Field2D& a, const Field2D& b) { return inner(a, b).real(); }

cplx inner(const Field2D& a, const Field2D& b) {
  require(a.grid_ptr().get() == b.grid_ptr().get(), ErrorCode::invalid_argument, "fields live on different grids");
  cplx s = 0.0;
  const auto va = a.values(), vb = b.values();
  for (std::size_t k : a.grid().interior_nodes()) s += std::conj(va[k]) * vb[k];
  return s * (a.grid().h() * a.grid().h());
}

Gradient gradient(const Field2D& f) {
  const Grid2D& g = f.grid();
  Gradient out{Field2D(f.grid_ptr()), Field2D(f.grid_ptr())};
  const auto v = f.values();
  auto gx = out.dx.values();
  auto gy = out.dy.values();
  const std::size_t nx = g.nx();
  const double inv2h = 0.5 / g.h();
  for (std::size_t k : g.interior_nodes()) {
    gx[k] = (v[k + 1] - v[k - 1]) * inv2h;
    gy[k] = (v[k + nx] - v[k - nx]) * inv2h;
  }
  return out;
}

cplx interpolate(const Field2D& f, Point p) {
  const Grid2D& g = f.grid();
  const double fx = (p.x - g.origin().x) / g.h();
  const double fy = (p.y - g.origin().y) / g.h();
  if (fx < 0.0 || fy < 0.0) return 0.0;
  const auto i = static_cast<std::size_t>(fx);
  const auto j = static_cast<std::size_t>(fy);
  if (i + 1 >= g.nx() || j + 1 >= g.ny()) return 0.0;
  const double sx = fx - static_cast<double>(i);
  const double sy = fy - static_cast<double>(j);
  return (1 - sx) * (1 - sy) * f(i, j) + sx * (1 - sy) * f(i + 1, j) + (1 - sx) * sy * f(i, j + 1) +
         sx * sy * f(i + 1, j + 1);
}

NormalDerivative normal_derivative_at(const Field2D& f, const BoundaryPoint& b) {
  const Grid2D& g = f.grid();
  const double h = g.h();
  const Point p1 = b.position - h * b.normal;
  const Point p2 = b.position - (2.0 * h) * b.normal;
  const DomainSpec& dom = g.domain();
  const bool axis_normal = std::abs(b.normal.x) < 1e-12 || std::abs(b.normal.y) < 1e-12;
  const bool mask_corner = dom.kind == DomainKind::mask && !axis_normal;
  NormalDerivative out;
  const cplx f1 = dom.contains(p1) ? interpolate(f, p1) : cplx(0.0);
  if (!mask_corner && dom.contains(p2)) {
    const cplx d = (interpolate(f, p2) - 4.0 * f1) / (2.0 * h);
    out.re = d.real();
    out.im = d.imag();
  } else {
    const cplx d = -f1 / h;
    out.re = d.real();
    out.im = d.imag();
    out.degenerate = true;
  }
  return out;
}

std::vector<NormalDerivative> boundary_normal_derivative(const Field2D& f) {
  std::vector<NormalDerivative> out;
  out.reserve(f.grid().boundary().size());
  for (const auto& b : f.grid().boundary()) out.push_back(normal_derivative_at(f, b));
  return out;
}

double boundary_integral(const Grid2D& grid, std::span<const double> values) {
  const auto pts = grid.boundary();
  require(values.size() == pts.size(), ErrorCode::invalid_argument, "boundary value count mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < pts.size(); ++k) s += pts[k].weight * values[k];
  return s;
}

bool sector_geometry_check(const DomainSpec& spec, double h) {
  spec.validate();
  const auto pts = analytic_boundary(spec, h);
  bool any = false;
  for (const auto& b : pts) {
    if (!b.straight_edge) continue;
    any = true;
    const double scale = std::max(1.0, norm(b.position));
    if (std::abs(dot(b.position, b.normal)) > 1e-12 * scale) return false;
  }
  return any;
}

void write_mask_pgm(const Grid2D& grid, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorCode::io_error, "cannot open " + path);
  os << "P5\n" << grid.nx() << " " << grid.ny() << "\n255\n";
  for (std::size_t jj = grid.ny(); jj-- > 0;) {
    for (std::size_t i = 0; i < grid.nx(); ++i) {
      unsigned char c = 0;
      if (grid.interior(i, jj)) {
        c = 255;
      } else {
        const bool adj = (i > 0 && grid.interior(i - 1, jj)) || (i + 1 < grid.nx() && grid.interior(i + 1, jj)) ||
                         (jj > 0 && grid.interior(i, jj - 1)) || (jj + 1 < grid.ny() && grid.interior(i, jj + 1));
        c = adj ? 128 : 0;
      }
      os.put(static_cast<char>(c));
    }
  }
}

}  // namespace blowup
