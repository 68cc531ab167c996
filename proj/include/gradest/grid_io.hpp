#pragma once

#include <iosfwd>
#include <memory>
#include <string>

#include "gradest/grid.hpp"

namespace gradest {

/// CSV snapshot: "# t=<time>" header, then a column header
/// "i0,..,x0,..,value" and one row per domain sample in storage order.
void write_csv(std::ostream& os, const GridFunction& u);
void write_csv(const std::string& path, const GridFunction& u);

/// Binary snapshot: magic "GRDF1\n", int32 dim, int32 shape[dim], float64 time,
/// float64 values (row-major, every stored sample), little endian.
void write_binary(std::ostream& os, const GridFunction& u);
void write_binary(const std::string& path, const GridFunction& u);

/// Reads a binary snapshot onto `grid`; throws std::runtime_error when the
/// header does not match the grid shape.
GridFunction read_binary(std::istream& is, std::shared_ptr<const Grid> grid);
GridFunction read_binary(const std::string& path, std::shared_ptr<const Grid> grid);

}  // namespace gradest
