#pragma once

// Comma-separated files: header row required, '.' decimal, RFC 4180 quoting.
// Column types are never inferred; categorical columns are named by the caller.

#include "globalqr/core.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace gqr {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header name; throws InvalidData when absent.
  std::size_t index(std::string_view name) const;
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);
void write_csv(std::ostream& out, const CsvTable& table);

/// Shortest text that parses back to the same double.
std::string format_number(double v);
/// Whole-field decimal parse; throws InvalidData naming `what` on failure.
double parse_number(std::string_view text, std::string_view what);

/// Builds a Dataset from the named columns; everything not listed in
/// `categorical` must be numeric.
Dataset dataset_from_csv(const CsvTable& table, const std::string& response, const std::vector<std::string>& interesting,
                         const std::vector<std::string>& nuisance, const std::vector<std::string>& categorical);

/// Response first, then the columns in dataset order.
CsvTable dataset_to_csv(const Dataset& dataset);

/// All cells numeric; the header row is skipped.
Eigen::MatrixXd matrix_from_csv(const CsvTable& table);
CsvTable matrix_to_csv(const Eigen::MatrixXd& m, const std::vector<std::string>& header);

}  // namespace gqr
