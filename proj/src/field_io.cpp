#include "blowup/field_io.hpp"

#include <cmath>
#include <fstream>

#include "blowup/error.hpp"

namespace blowup {

void write_field(const Field2D& f, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::io_error, "cannot open " + path);
  const Grid2D& g = f.grid();
  const std::uint64_t dims[2] = {g.nx(), g.ny()};
  const double hdr[3] = {g.h(), g.origin().x, g.origin().y};
  out.write(reinterpret_cast<const char*>(dims), sizeof dims);
  out.write(reinterpret_cast<const char*>(hdr), sizeof hdr);
  // std::complex<double> is layout-compatible with double[2]
  out.write(reinterpret_cast<const char*>(f.values().data()),
            static_cast<std::streamsize>(f.values().size() * sizeof(cplx)));
  require(static_cast<bool>(out), ErrorCode::io_error, "write failed: " + path);
}

FieldFile read_field_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::io_error, "cannot open " + path);
  FieldFile ff;
  std::uint64_t dims[2];
  double hdr[3];
  in.read(reinterpret_cast<char*>(dims), sizeof dims);
  in.read(reinterpret_cast<char*>(hdr), sizeof hdr);
  require(static_cast<bool>(in), ErrorCode::io_error, "truncated header: " + path);
  ff.nx = dims[0];
  ff.ny = dims[1];
  ff.h = hdr[0];
  ff.origin = {hdr[1], hdr[2]};
  require(ff.nx > 0 && ff.ny > 0 && ff.nx * ff.ny < (1ull << 32) && ff.h > 0.0, ErrorCode::io_error,
          "implausible header: " + path);
  ff.values.resize(ff.nx * ff.ny);
  in.read(reinterpret_cast<char*>(ff.values.data()), static_cast<std::streamsize>(ff.values.size() * sizeof(cplx)));
  require(static_cast<bool>(in), ErrorCode::io_error, "truncated data: " + path);
  return ff;
}

Field2D read_field(const std::string& path, const GridPtr& grid) {
  FieldFile ff = read_field_file(path);
  const double tol = 1e-9 * grid->h();
  require(ff.nx == grid->nx() && ff.ny == grid->ny() && std::abs(ff.h - grid->h()) <= tol &&
              std::abs(ff.origin.x - grid->origin().x) <= tol && std::abs(ff.origin.y - grid->origin().y) <= tol,
          ErrorCode::config_error, "field lattice does not match the configured grid: " + path);
  Field2D f(grid, std::move(ff.values));
  f.enforce_dirichlet();
  return f;
}

}  // namespace blowup
