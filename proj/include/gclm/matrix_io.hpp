#pragma once

#include <Eigen/Dense>
#include <string>

#include "gclm/errors.hpp"

namespace gclm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Reads a dense matrix from a CSV file: one row per line, comma-separated
// decimal values, no header unless skip_header is set.
Matrix read_matrix_csv(const std::string& path, bool skip_header = false);

// Writes a matrix as CSV with 17 significant digits, enough for doubles to
// round-trip exactly.
void write_matrix_csv(const std::string& path, const Matrix& m);

std::string format_double(double x);

}  // namespace gclm
