#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blowup/grid.hpp"

namespace blowup {

// Binary field file: uint64 nx, uint64 ny, f64 h, f64 origin_x, f64 origin_y,
// then nx*ny pairs (re, im) of f64, row-major (j * nx + i). Native little-endian.
struct FieldFile {
  std::uint64_t nx = 0;
  std::uint64_t ny = 0;
  double h = 0.0;
  Point origin{};
  std::vector<cplx> values;
};

void write_field(const Field2D& f, const std::string& path);
FieldFile read_field_file(const std::string& path);

/// Loads a field onto `grid`; the lattice (nx, ny, h, origin) must match. Off-interior values are zeroed.
Field2D read_field(const std::string& path, const GridPtr& grid);

}  // namespace blowup
