#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace blowup {

using cplx = std::complex<double>;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
double norm(Point a);

enum class DomainKind { rectangle, disc, sector, half_disc, mask };

std::string to_string(DomainKind kind);
DomainKind domain_kind_from_string(const std::string& name);

// Plane domain with Dirichlet boundary. Placement conventions:
//   rectangle  [ox, ox + width] x [oy, oy + height], origin = lower-left corner
//   disc       |p - origin| < radius
//   sector     0 < arg(p - origin) < angle, |p - origin| < radius
//   half_disc  p.y > origin.y, |p - origin| < radius (diameter on the line y = origin.y)
//   mask       explicit interior bitmap on its own node lattice
struct DomainSpec {
  DomainKind kind = DomainKind::disc;
  double width = 0.0;
  double height = 0.0;
  double radius = 0.0;
  double angle = 0.0;
  Point origin{};

  std::size_t mask_nx = 0;
  std::size_t mask_ny = 0;
  double mask_h = 0.0;
  std::vector<std::uint8_t> mask_bits;  // row-major, j * mask_nx + i

  static DomainSpec rectangle(double width, double height, Point lower_left = {});
  static DomainSpec disc(double radius, Point center = {});
  static DomainSpec sector(double angle, double radius, Point vertex = {});
  static DomainSpec half_disc(double radius, Point center = {});
  static DomainSpec mask(std::size_t nx, std::size_t ny, double h, Point origin,
                         std::vector<std::uint8_t> bits);

  void validate() const;

  /// Strict interior test.
  bool contains(Point p) const;

  /// Distance from an interior point to the boundary (0 outside).
  double boundary_distance(Point p) const;
};

struct BoundaryPoint {
  Point position;  // on the boundary
  Point normal;    // unit outward normal
  double weight = 0.0;  // arc-length quadrature weight
  bool straight_edge = false;
};

/// Uniform node lattice with Dirichlet mask. Non-interior nodes carry u = 0.
class Grid2D {
 public:
  Grid2D(DomainSpec domain, double h);

  double h() const { return h_; }
  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  std::size_t size() const { return nx_ * ny_; }
  Point origin() const { return origin_; }
  const DomainSpec& domain() const { return domain_; }

  std::size_t index(std::size_t i, std::size_t j) const { return j * nx_ + i; }
  Point node(std::size_t i, std::size_t j) const {
    return {origin_.x + static_cast<double>(i) * h_, origin_.y + static_cast<double>(j) * h_};
  }
  bool interior(std::size_t i, std::size_t j) const { return mask_[index(i, j)] != 0; }
  std::span<const std::uint8_t> interior_mask() const { return mask_; }

  /// Flat indices of interior nodes, increasing.
  std::span<const std::size_t> interior_nodes() const { return interior_nodes_; }
  std::size_t interior_count() const { return interior_nodes_.size(); }
  /// Non-interior nodes with at least one interior 4-neighbour.
  std::size_t boundary_node_count() const { return boundary_node_count_; }
  std::size_t exterior_count() const { return size() - interior_count() - boundary_node_count(); }

  std::span<const BoundaryPoint> boundary() const { return boundary_; }

 private:
  DomainSpec domain_;
  double h_;
  std::size_t nx_ = 0;
  std::size_t ny_ = 0;
  Point origin_{};
  std::vector<std::uint8_t> mask_;
  std::vector<std::size_t> interior_nodes_;
  std::size_t boundary_node_count_ = 0;
  std::vector<BoundaryPoint> boundary_;
};

using GridPtr = std::shared_ptr<const Grid2D>;

GridPtr make_grid(const DomainSpec& domain, double h);

/// Complex field on a grid; values vanish on every non-interior node.
class Field2D {
 public:
  explicit Field2D(GridPtr grid);
  Field2D(GridPtr grid, std::vector<cplx> values);

  template <class F>
  static Field2D sample(GridPtr grid, F&& fn) {
    Field2D out(grid);
    for (std::size_t k : grid->interior_nodes()) {
      const std::size_t i = k % grid->nx();
      const std::size_t j = k / grid->nx();
      const Point p = grid->node(i, j);
      out.values_[k] = cplx(fn(p.x, p.y));
    }
    return out;
  }

  const Grid2D& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  std::span<const cplx> values() const { return values_; }
  /// Mutable access; callers writing off-interior nodes must call enforce_dirichlet().
  std::span<cplx> values() { return values_; }
  cplx operator()(std::size_t i, std::size_t j) const { return values_[grid_->index(i, j)]; }
  cplx at(std::size_t k) const { return values_[k]; }

  void enforce_dirichlet();
  Field2D& operator*=(cplx s);
  Field2D& operator+=(const Field2D& other);
  Field2D& operator-=(const Field2D& other);

 private:
  GridPtr grid_;
  std::vector<cplx> values_;
};

Field2D operator-(Field2D a, const Field2D& b);
Field2D operator*(cplx s, Field2D a);
Field2D modulus(const Field2D& f);

// Discrete calculus -------------------------------------------------------

/// Five-point Laplacian with zero extension outside the interior.
Field2D laplacian(const Field2D& f);

/// Sum over interior nodes times h^2.
double integrate(const Grid2D& grid, std::span<const double> nodal);
double integrate(const Grid2D& grid, const std::function<double(std::size_t k, Point p)>& fn);

double mass(const Field2D& f);            // sum |f|^2 h^2
double l4_fourth(const Field2D& f);       // sum |f|^4 h^2
/// Edge-difference Dirichlet form; equals <-Laplacian f, f> exactly.
double grad_norm_sq(const Field2D& f);
double inner_real(const Field2D& a, const Field2D& b);  // Re sum conj(a) b h^2
cplx inner(const Field2D& a, const Field2D& b);         // sum conj(a) b h^2

struct Gradient {
  Field2D dx;
  Field2D dy;
};

/// Centred differences with zero extension.
Gradient gradient(const Field2D& f);

/// Bilinear interpolation of the nodal array (zero outside the lattice).
cplx interpolate(const Field2D& f, Point p);

struct NormalDerivative {
  double re = 0.0;
  double im = 0.0;
  bool degenerate = false;  // first-order fallback was used
  double abs_sq() const { return re * re + im * im; }
};

/// One-sided second-order derivative along the outward normal at a boundary point.
NormalDerivative normal_derivative_at(const Field2D& f, const BoundaryPoint& b);
std::vector<NormalDerivative> boundary_normal_derivative(const Field2D& f);

/// Sum of weight * value over the grid's boundary points.
double boundary_integral(const Grid2D& grid, std::span<const double> values);

/// x . nu == 0 on every straight boundary edge (tolerance 1e-12).
bool sector_geometry_check(const DomainSpec& spec, double h = 0.01);

/// Binary PGM of the mask: 255 interior, 128 boundary node, 0 exterior.
void write_mask_pgm(const Grid2D& grid, const std::string& path);

}  // namespace blowup
