#include "gclm/matrix_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

namespace gclm {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

static double parse_field(const std::string& field, const std::string& path,
                          int line_no) {
  const char* begin = field.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  // Allow surrounding whitespace but nothing else.
  while (end && *end != '\0' && (*end == ' ' || *end == '\t' || *end == '\r')) ++end;
  const char* b = begin;
  while (*b == ' ' || *b == '\t') ++b;
  if (end == begin || b == end || (end && *end != '\0')) {
    throw ValidationError(path + ":" + std::to_string(line_no) +
                          ": cannot parse '" + field + "' as a number");
  }
  return v;
}

Matrix read_matrix_csv(const std::string& path, bool skip_header) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (first && skip_header) {
      first = false;
      continue;
    }
    first = false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
      row.push_back(parse_field(field, path, line_no));
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ValidationError(path + ":" + std::to_string(line_no) +
                            ": ragged row (expected " +
                            std::to_string(rows.front().size()) + " fields, got " +
                            std::to_string(row.size()) + ")");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError(path + ": empty matrix file");
  Matrix m(static_cast<Eigen::Index>(rows.size()),
           static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
  return m;
}

void write_matrix_csv(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open file for writing: " + path);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
  if (!out) throw ValidationError("write failed: " + path);
}

}  // namespace gclm
