#pragma once

// Rank-based global envelope test over a collection of test vectors
// T_0 (observed), T_1..T_s (null replicates).
//
// Each coordinate is ranked two-sidedly across the s+1 vectors; a vector's
// measure E_i summarises how extreme it is overall (smaller = more extreme).
// The envelope is the coordinatewise min/max over the vectors that survive the
// removal of at most alpha*(s+1) most extreme ones, and the global p-value is
// the share of vectors at least as extreme as T_0. Leaving the band somewhere
// is equivalent to p <= alpha.

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <vector>

namespace gqr {

enum class MeasureId { ERL, AREA };

std::string_view to_string(MeasureId id);
MeasureId parse_measure(std::string_view text);

struct GlobalEnvelope {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::VectorXd central;    // pointwise median of the replicates (display only)
  Eigen::VectorXd measures;   // E_0..E_s
  double p_value = 1.0;
  double alpha = 0.05;
  std::vector<bool> outside_mask;
  std::size_t kept = 0;       // |I_alpha|
  std::vector<std::string> warnings;

  bool rejects() const;
  bool observed_outside() const;
};

/// Two-sided mid-ranks: R_ik = min(r_ik, s+2-r_ik) with r the ascending mid-rank in column k.
Eigen::MatrixXd pointwise_ranks(const Eigen::MatrixXd& curves);

/// Extreme rank length: rows compared lexicographically on their ascending-sorted ranks.
Eigen::VectorXd erl_measure(const Eigen::MatrixXd& ranks);

/// ERL with ties broken by the normalised area by which a row leaves the hull
/// of the strictly less extreme rows.
Eigen::VectorXd area_measure(const Eigen::MatrixXd& curves, const Eigen::MatrixXd& ranks);

Eigen::VectorXd compute_measure(const Eigen::MatrixXd& curves, MeasureId measure);

GlobalEnvelope build_envelope(const Eigen::MatrixXd& curves, MeasureId measure, double alpha);

/// Holm step-down adjustment, returned in input order.
std::vector<double> holm_adjust(const std::vector<double>& pvalues);

}  // namespace gqr
