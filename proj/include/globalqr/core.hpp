#pragma once

// Domain data model shared by every stage of the global test: the validated
// dataset, the quantile grid, dummy-coded design matrices and the test-vector
// layout used to stack coefficient curves.

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <vector>

namespace gqr {

enum class ColumnType { Continuous, Categorical };

struct Column {
  std::string name;
  ColumnType type = ColumnType::Continuous;
  std::vector<double> numeric;       // Continuous columns.
  std::vector<std::string> labels;   // Categorical columns.

  std::size_t size() const {
    return type == ColumnType::Continuous ? numeric.size() : labels.size();
  }
  /// Distinct labels in lexicographic order; the first one is the reference level.
  std::vector<std::string> levels() const;

  static Column continuous(std::string name, std::vector<double> values);
  static Column categorical(std::string name, std::vector<std::string> labels);
  /// Categorical column whose labels are the shortest round-trip decimal form of the values.
  static Column categorical_from_numbers(std::string name, const std::vector<double>& values);
};

/// Response plus covariate columns, split into interesting (X) and nuisance (Z) roles.
/// Immutable once built; construction enforces the ingestion invariants.
class Dataset {
 public:
  Dataset(std::string response_name, std::vector<double> y, std::vector<Column> columns,
          std::vector<std::string> interesting, std::vector<std::string> nuisance);

  std::size_t n() const { return y_.size(); }
  const std::string& response_name() const { return response_name_; }
  const std::vector<double>& y() const { return y_; }
  const std::vector<Column>& columns() const { return columns_; }
  const std::vector<std::string>& interesting() const { return interesting_; }
  const std::vector<std::string>& nuisance() const { return nuisance_; }

  const Column& column(std::string_view name) const;
  bool all_nuisance_categorical() const;

  /// Same covariates, different response (used for permuted replicates).
  Dataset with_response(std::vector<double> y) const;

 private:
  std::string response_name_;
  std::vector<double> y_;
  std::vector<Column> columns_;
  std::vector<std::string> interesting_;
  std::vector<std::string> nuisance_;
};

class QuantileGrid {
 public:
  explicit QuantileGrid(std::vector<double> taus);

  /// d equally spaced values on [lo, hi], inclusive.
  static QuantileGrid equally_spaced(std::size_t d, double lo, double hi);
  /// Either a comma separated list ("0.1,0.5,0.9") or "d@lo:hi".
  static QuantileGrid parse(std::string_view spec);

  std::size_t size() const { return taus_.size(); }
  double operator[](std::size_t k) const { return taus_[k]; }
  const std::vector<double>& taus() const { return taus_; }

 private:
  std::vector<double> taus_;
};

struct DesignMatrices {
  Eigen::MatrixXd x;                    // n x p, interesting covariates.
  Eigen::MatrixXd z;                    // n x q, column 0 is the intercept.
  std::vector<std::string> x_labels;    // "col" or "col[level]".
  std::vector<std::string> z_labels;

  std::size_t n() const { return static_cast<std::size_t>(x.rows()); }
  std::size_t p() const { return static_cast<std::size_t>(x.cols()); }
  std::size_t q() const { return static_cast<std::size_t>(z.cols()); }
  /// [X Z], the design of the full model.
  Eigen::MatrixXd full() const;
  /// [1 X], the design of the residual-stage fits.
  Eigen::MatrixXd intercept_and_x() const;
};

DesignMatrices build_design(const Dataset& dataset);

/// Rows of the test-vector collection: row 0 observed, rows 1..s replicates.
struct CurveSet {
  Eigen::MatrixXd curves;
  std::size_t p = 1;
  std::size_t d = 1;

  std::size_t s() const { return static_cast<std::size_t>(curves.rows()) - 1; }
  std::size_t width() const { return static_cast<std::size_t>(curves.cols()); }
  std::size_t column(std::size_t j, std::size_t k) const { return j * d + k; }
};

/// Stacks a p x d coefficient matrix (row j = curve of coefficient j over the
/// grid) into the length p*d vector: coefficient 1 over all taus, then 2, ...
Eigen::VectorXd assemble_test_vector(const Eigen::MatrixXd& beta_by_tau, std::size_t p,
                                     std::size_t d);
Eigen::MatrixXd disassemble_test_vector(const Eigen::VectorXd& vec, std::size_t p,
                                        std::size_t d);

/// Relative singular value threshold for the nuisance rank check.
inline constexpr double kRankTolerance = 1e-10;
bool has_full_column_rank(const Eigen::MatrixXd& m, double rel_tol = kRankTolerance);

}  // namespace gqr
