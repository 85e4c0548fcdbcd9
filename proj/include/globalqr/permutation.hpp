#pragma once

// Null-model generation for the global test. A NullModel is prepared once from
// the observed data and then yields permuted replicates by index; replicate i
// depends only on (seed, i).
//
//   FL      permute rows of the reduced-model residual matrix, add back Z*gamma(tau)
//   FLPLUS  FL, then drop q-1 zero-residual rows per tau
//   WN      permute y within level combinations of the categorical nuisance covariates
//   RL      permute residuals of the least-squares fit of y on Z
//   RLS     as RL, residuals divided by a least-squares fit of their absolute values
//   RQ      per tau, permute residuals of the quantile fit of y on Z (same permutation for all tau)

#include "globalqr/core.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace gqr {

enum class StrategyId { FL, FLPLUS, WN, RL, RLS, RQ };

std::string_view to_string(StrategyId id);
/// Case-insensitive; accepts "fl+" as an alias of FLPLUS.
StrategyId parse_strategy(std::string_view text);

/// Maps replicate index -> permutation of {0..n-1}. Test hook; production draws use Philox streams.
using PermutationSource = std::function<std::vector<std::size_t>(std::uint64_t index)>;

struct NullModel {
  StrategyId strategy = StrategyId::FL;
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t q = 0;
  double zero_tol = 0;

  Eigen::VectorXd y;
  // FL / FLPLUS: Z * gamma_hat(tau_k), n x d.
  Eigen::MatrixXd reduced_fitted;
  // FL/FLPLUS: n x d; RL/RLS: n x 1 (eps_Z); RQ: n x d (eps_Z(tau_k)); WN: n x 1 (y).
  Eigen::MatrixXd residuals;
  // WN: the partition of row indices, groups ordered by first occurrence.
  std::vector<std::vector<std::size_t>> groups;

  // RLS diagnostics.
  std::size_t nonpositive_scales = 0;
  std::size_t clamped_scales = 0;
  // FLPLUS diagnostics: taus at which the reduced fit did not have exactly q zero residuals.
  std::size_t flplus_degenerate_taus = 0;

  PermutationSource permutation_source;

  /// The permutation applied by replicate i (within groups for WN).
  std::vector<std::size_t> permutation(std::uint64_t index) const;
};

struct ReplicateData {
  /// Response to regress at each tau (a single entry when shared_response).
  std::vector<Eigen::VectorXd> per_tau;
  bool shared_response = false;
  /// False only for FLPLUS, whose per-tau fits use a subset of the rows.
  bool shared_design = true;
  /// FLPLUS: rows kept at each tau (ascending).
  std::vector<std::vector<std::size_t>> kept_indices;
  std::vector<std::size_t> permutation;

  const Eigen::VectorXd& response(std::size_t k) const { return shared_response ? per_tau.front() : per_tau[k]; }
};

/// Groups of rows sharing every categorical nuisance level.
std::vector<std::vector<std::size_t>> nuisance_groups(const Dataset& dataset);

NullModel prepare_null_model(const Dataset& dataset, const DesignMatrices& design, const QuantileGrid& grid,
                             StrategyId strategy, std::uint64_t seed);

/// i = 0 is the observed data and cannot be drawn.
ReplicateData draw_replicate(const NullModel& model, std::uint64_t index);

}  // namespace gqr
