#pragma once

// The global test: observed test vector, s permuted replicates refit with the
// same recipe, and a global envelope over the collection.

#include "globalqr/core.hpp"
#include "globalqr/envelope.hpp"
#include "globalqr/permutation.hpp"
#include "globalqr/qr_solver.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gqr {

struct TestConfig {
  QuantileGrid grid = QuantileGrid::equally_spaced(10, 0.01, 0.99);
  StrategyId strategy = StrategyId::RL;
  std::size_t s = 999;
  double alpha = 0.05;
  MeasureId measure = MeasureId::ERL;
  std::uint64_t seed = 1;
  std::size_t workers = 1;

  void validate() const;
};

struct SignificantCoordinate {
  std::string label;
  double tau;
  std::size_t index;  // position in the test vector
};

struct Comparators {
  double ph = 1.0;  // min Holm-adjusted pointwise p-value
  double nc = 1.0;  // min unadjusted pointwise p-value
};

struct TestOutcome {
  GlobalEnvelope envelope;
  CurveSet curves;
  Eigen::VectorXd observed;
  std::vector<std::string> coefficient_labels;  // length p
  std::vector<double> taus;
  std::vector<SignificantCoordinate> significant_coordinates;
  std::optional<Comparators> comparator_p;
  std::vector<std::string> diagnostics;
};

/// Prepared observed-statistic recipe shared by the observed data and the replicates.
class StatisticRecipe {
 public:
  StatisticRecipe(const DesignMatrices& design, const QuantileGrid& grid, StrategyId strategy);

  std::size_t p() const { return p_; }
  std::size_t d() const { return taus_.size(); }

  /// Test vector for one replicate (or for the observed data, see observed()).
  Eigen::VectorXd compute(const ReplicateData& data) const;
  /// Observed test vector from the frozen state of a prepared null model.
  Eigen::VectorXd observed(const NullModel& model, const Dataset& dataset);

  std::size_t extreme_tau_fits() const { return extreme_fits_; }

 private:
  Eigen::VectorXd fit_all(const ReplicateData& data, std::vector<QrFit>* fits) const;

  StrategyId strategy_;
  std::vector<double> taus_;
  std::size_t p_;
  std::size_t offset_;  // coefficients of X start here in the fitted design
  Eigen::MatrixXd design_;
  std::optional<QrSolver> solver_;
  std::vector<std::vector<Eigen::Index>> warm_;  // optimal bases of the observed fits
  std::size_t extreme_fits_ = 0;
};

Eigen::VectorXd observed_statistic(const Dataset& dataset, const DesignMatrices& design, const QuantileGrid& grid,
                                   StrategyId strategy);

TestOutcome global_test(const Dataset& dataset, const TestConfig& config,
                        const PermutationSource& permutation_hook = {});

/// Per-coordinate two-sided permutation p-values around the replicate median.
std::vector<double> pointwise_perm_pvalues(const Eigen::MatrixXd& curves);

Comparators comparators(const Eigen::MatrixXd& curves);

}  // namespace gqr
