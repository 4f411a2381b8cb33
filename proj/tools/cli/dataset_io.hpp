#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bvecchia/spatial.hpp"

namespace bvecchia::cli {

struct Dataset {
  LocationSet points;
  std::vector<double> values;
};

// Shortest decimal text that parses back to the same double (17 significant digits).
std::string format_double(double v);

// CSV with header x,y[,z],value.
void write_csv(std::ostream& out, const LocationSet& points, std::span<const double> values);
void write_csv(const std::string& path, const LocationSet& points, std::span<const double> values);

// Throws IoError on unreadable files or malformed rows, InvalidData on
// non-finite coordinates.
Dataset read_csv(std::istream& in);
Dataset read_csv(const std::string& path);

}  // namespace bvecchia::cli
