#include "globalqr/permutation.hpp"

#include "globalqr/error.hpp"
#include "globalqr/qr_solver.hpp"
#include "globalqr/rng.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>

namespace gqr {

std::string_view to_string(StrategyId id) {
  switch (id) {
    case StrategyId::FL: return "FL";
    case StrategyId::FLPLUS: return "FLPLUS";
    case StrategyId::WN: return "WN";
    case StrategyId::RL: return "RL";
    case StrategyId::RLS: return "RLS";
    case StrategyId::RQ: return "RQ";
  }
  return "?";
}

StrategyId parse_strategy(std::string_view text) {
  std::string up;
  for (char c : text) up.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (up == "FL") return StrategyId::FL;
  if (up == "FLPLUS" || up == "FL+") return StrategyId::FLPLUS;
  if (up == "WN") return StrategyId::WN;
  if (up == "RL") return StrategyId::RL;
  if (up == "RLS") return StrategyId::RLS;
  if (up == "RQ") return StrategyId::RQ;
  throw Error(ErrorKind::InvalidArgument, "unknown strategy '" + std::string(text) + "'");
}

std::vector<std::size_t> NullModel::permutation(std::uint64_t index) const {
  if (index == 0) throw Error(ErrorKind::IndexZeroReserved, "replicate index 0 denotes the observed data");
  if (permutation_source) {
    auto perm = permutation_source(index);
    if (perm.size() != n) throw Error(ErrorKind::DimensionMismatch, "permutation hook returned wrong length");
    return perm;
  }
  PhiloxStream rng(seed, index);
  if (strategy != StrategyId::WN) return random_permutation(n, rng);

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (const auto& group : groups) {
    auto local = random_permutation(group.size(), rng);
    for (std::size_t k = 0; k < group.size(); ++k) perm[group[k]] = group[local[k]];
  }
  return perm;
}

std::vector<std::vector<std::size_t>> nuisance_groups(const Dataset& dataset) {
  std::map<std::vector<std::string>, std::size_t> index;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < dataset.n(); ++i) {
    std::vector<std::string> key;
    for (const auto& name : dataset.nuisance()) key.push_back(dataset.column(name).labels[i]);
    auto [it, inserted] = index.emplace(std::move(key), groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  return groups;
}

NullModel prepare_null_model(const Dataset& dataset, const DesignMatrices& design, const QuantileGrid& grid,
                             StrategyId strategy, std::uint64_t seed) {
  NullModel model;
  model.strategy = strategy;
  model.seed = seed;
  model.n = dataset.n();
  model.d = grid.size();
  model.q = design.q();
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(dataset.y().data(), static_cast<Eigen::Index>(dataset.n()));
  model.y = y;
  model.zero_tol = zero_tolerance(y);
  const auto n = static_cast<Eigen::Index>(model.n);
  const auto d = static_cast<Eigen::Index>(model.d);

  switch (strategy) {
    case StrategyId::FL:
    case StrategyId::FLPLUS:
    case StrategyId::RQ: {
      auto fits = qr_fit_grid(design.z, y, grid);
      model.residuals.resize(n, d);
      if (strategy != StrategyId::RQ) model.reduced_fitted.resize(n, d);
      for (Eigen::Index k = 0; k < d; ++k) {
        const auto& fit = fits[static_cast<std::size_t>(k)];
        model.residuals.col(k) = fit.residuals;
        if (strategy != StrategyId::RQ) model.reduced_fitted.col(k) = design.z * fit.beta;
        if (fit.n_zero != model.q) ++model.flplus_degenerate_taus;
      }
      if (strategy != StrategyId::FLPLUS) model.flplus_degenerate_taus = 0;
      break;
    }
    case StrategyId::WN: {
      if (!dataset.all_nuisance_categorical())
        throw Error(ErrorKind::WnNeedsCategorical, "WN requires categorical nuisance");
      model.groups = nuisance_groups(dataset);
      model.residuals = y;
      break;
    }
    case StrategyId::RL: {
      model.residuals = ols_fit(design.z, y).residuals;
      break;
    }
    case StrategyId::RLS: {
      const Eigen::VectorXd location = ols_fit(design.z, y).residuals;
      const Eigen::VectorXd scale = ols_fit(design.z, location.cwiseAbs()).fitted;
      const double floor = 1e-6 * location.cwiseAbs().mean();
      Eigen::VectorXd filtered(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        if (scale(i) <= 0) ++model.nonpositive_scales;
        double s = scale(i);
        if (!(s >= floor)) {
          ++model.clamped_scales;
          s = floor;
        }
        // floor is 0 only when every location residual is 0
        filtered(i) = s > 0 ? location(i) / s : 0.0;
      }
      model.residuals = filtered;
      break;
    }
  }
  return model;
}

ReplicateData draw_replicate(const NullModel& model, std::uint64_t index) {
  ReplicateData rep;
  rep.permutation = model.permutation(index);
  const auto& perm = rep.permutation;
  const auto n = static_cast<Eigen::Index>(model.n);
  const auto d = static_cast<Eigen::Index>(model.d);

  auto permuted_column = [&](Eigen::Index k) {
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) out(i) = model.residuals(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]), k);
    return out;
  };

  switch (model.strategy) {
    case StrategyId::WN:
    case StrategyId::RL:
    case StrategyId::RLS:
      rep.shared_response = true;
      rep.per_tau.push_back(permuted_column(0));
      break;
    case StrategyId::RQ:
      for (Eigen::Index k = 0; k < d; ++k) rep.per_tau.push_back(permuted_column(k));
      break;
    case StrategyId::FL:
      // y + (eps* - eps) rather than fitted + eps*, so that fixed points reproduce y exactly
      for (Eigen::Index k = 0; k < d; ++k) rep.per_tau.push_back(model.y + (permuted_column(k) - model.residuals.col(k)));
      break;
    case StrategyId::FLPLUS: {
      rep.shared_design = false;
      const std::size_t drop = model.q - 1;
      std::vector<std::size_t> order(model.n);
      for (Eigen::Index k = 0; k < d; ++k) {
        const Eigen::VectorXd eps = permuted_column(k);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
          return std::abs(eps(static_cast<Eigen::Index>(a))) < std::abs(eps(static_cast<Eigen::Index>(b)));
        });
        std::vector<std::size_t> kept(order.begin() + static_cast<std::ptrdiff_t>(drop), order.end());
        std::sort(kept.begin(), kept.end());
        Eigen::VectorXd response(static_cast<Eigen::Index>(kept.size()));
        for (std::size_t r = 0; r < kept.size(); ++r) {
          const auto i = static_cast<Eigen::Index>(kept[r]);
          response(static_cast<Eigen::Index>(r)) = model.y(i) + (eps(i) - model.residuals(i, k));
        }
        rep.per_tau.push_back(std::move(response));
        rep.kept_indices.push_back(std::move(kept));
      }
      break;
    }
  }
  return rep;
}

}  // namespace gqr
