#include "dataset_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "bvecchia/error.hpp"

namespace bvecchia::cli {

std::string format_double(double v) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(len));
}

void write_csv(std::ostream& out, const LocationSet& points, std::span<const double> values) {
  if (values.size() != points.size()) {
    throw InvalidArgument("write_csv: one value per location is required");
  }
  out << (points.dim() == 3 ? "x,y,z,value\n" : "x,y,value\n");
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t k = 0; k < points.dim(); ++k) out << format_double(points(i, k)) << ',';
    out << format_double(values[i]) << '\n';
  }
}

void write_csv(const std::string& path, const LocationSet& points, std::span<const double> values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_csv(out, points, values);
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

Dataset read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("read_csv: empty input");
  const auto header = split(line);
  std::size_t dim = 0;
  if (header == std::vector<std::string>{"x", "y", "value"}) {
    dim = 2;
  } else if (header == std::vector<std::string>{"x", "y", "z", "value"}) {
    dim = 3;
  } else {
    throw IoError("read_csv: header must be x,y,value or x,y,z,value");
  }

  std::vector<double> coords;
  std::vector<double> values;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    if (fields.size() != dim + 1) {
      throw IoError("read_csv: line " + std::to_string(lineno) + " has " +
                    std::to_string(fields.size()) + " fields, expected " + std::to_string(dim + 1));
    }
    for (std::size_t k = 0; k <= dim; ++k) {
      const std::string& f = fields[k];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || f.empty()) {
        throw IoError("read_csv: line " + std::to_string(lineno) + ": cannot parse '" + f + "'");
      }
      (k < dim ? coords : values).push_back(v);
    }
  }
  if (values.empty()) throw IoError("read_csv: no data rows");
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidData("read_csv: non-finite observation");
  }
  return Dataset{LocationSet(std::move(coords), dim), std::move(values)};
}

Dataset read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_csv(in);
}

}  // namespace bvecchia::cli
