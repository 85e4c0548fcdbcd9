#include "globalqr/inference.hpp"

#include "globalqr/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

namespace gqr {

void TestConfig::validate() const {
  if (s < 1) throw Error(ErrorKind::InvalidArgument, "number of permutations must be at least 1");
  if (!(alpha > 0 && alpha < 1)) throw Error(ErrorKind::InvalidArgument, "alpha must lie in (0,1)");
}

StatisticRecipe::StatisticRecipe(const DesignMatrices& design, const QuantileGrid& grid, StrategyId strategy)
    : strategy_(strategy), taus_(grid.taus()), p_(design.p()) {
  switch (strategy) {
    case StrategyId::FL:
    case StrategyId::FLPLUS:
    case StrategyId::WN:
      design_ = design.full();
      offset_ = 0;
      break;
    case StrategyId::RL:
    case StrategyId::RLS:
    case StrategyId::RQ:
      // the residual-stage fits always carry their own intercept
      design_ = design.intercept_and_x();
      offset_ = 1;
      break;
  }
  solver_.emplace(design_);
  warm_.resize(taus_.size());
}

Eigen::VectorXd StatisticRecipe::fit_all(const ReplicateData& data, std::vector<QrFit>* fits) const {
  const std::size_t d = taus_.size();
  Eigen::VectorXd out(static_cast<Eigen::Index>(p_ * d));
  for (std::size_t k = 0; k < d; ++k) {
    const double tau = taus_[k];
    try {
      QrFit fit;
      if (data.shared_design) {
        fit = solver_->fit(data.response(k), tau, warm_[k].empty() ? nullptr : &warm_[k]);
      } else {
        const auto& kept = data.kept_indices[k];
        Eigen::MatrixXd sub(static_cast<Eigen::Index>(kept.size()), design_.cols());
        for (std::size_t r = 0; r < kept.size(); ++r)
          sub.row(static_cast<Eigen::Index>(r)) = design_.row(static_cast<Eigen::Index>(kept[r]));
        fit = QrSolver(sub).fit(data.response(k), tau);
      }
      if (fits) fits->push_back(fit);
      for (std::size_t j = 0; j < p_; ++j)
        out(static_cast<Eigen::Index>(j * d + k)) = fit.beta(static_cast<Eigen::Index>(offset_ + j));
    } catch (const Error& e) {
      std::ostringstream msg;
      msg << "tau=" << tau << ": " << e.what();
      throw Error(e.kind(), msg.str());
    }
  }
  return out;
}

Eigen::VectorXd StatisticRecipe::compute(const ReplicateData& data) const { return fit_all(data, nullptr); }

Eigen::VectorXd StatisticRecipe::observed(const NullModel& model, const Dataset& dataset) {
  ReplicateData obs;
  switch (strategy_) {
    case StrategyId::FL:
    case StrategyId::FLPLUS:
    case StrategyId::WN:
      obs.shared_response = true;
      obs.per_tau.push_back(Eigen::Map<const Eigen::VectorXd>(dataset.y().data(), static_cast<Eigen::Index>(dataset.n())));
      break;
    case StrategyId::RL:
    case StrategyId::RLS:
      obs.shared_response = true;
      obs.per_tau.push_back(model.residuals.col(0));
      break;
    case StrategyId::RQ:
      for (Eigen::Index k = 0; k < model.residuals.cols(); ++k) obs.per_tau.push_back(model.residuals.col(k));
      break;
  }
  std::vector<QrFit> fits;
  auto vec = fit_all(obs, &fits);
  extreme_fits_ = 0;
  for (std::size_t k = 0; k < fits.size(); ++k) {
    warm_[k] = fits[k].basis;
    if (fits[k].extreme_tau) ++extreme_fits_;
  }
  return vec;
}

Eigen::VectorXd observed_statistic(const Dataset& dataset, const DesignMatrices& design, const QuantileGrid& grid,
                                   StrategyId strategy) {
  const auto model = prepare_null_model(dataset, design, grid, strategy, 0);
  StatisticRecipe recipe(design, grid, strategy);
  return recipe.observed(model, dataset);
}

TestOutcome global_test(const Dataset& dataset, const TestConfig& config, const PermutationSource& permutation_hook) {
  config.validate();
  if (config.strategy == StrategyId::WN && !dataset.all_nuisance_categorical())
    throw Error(ErrorKind::WnNeedsCategorical, "WN requires categorical nuisance");

  const auto design = build_design(dataset);
  auto model = prepare_null_model(dataset, design, config.grid, config.strategy, config.seed);
  if (permutation_hook) model.permutation_source = permutation_hook;

  StatisticRecipe recipe(design, config.grid, config.strategy);
  const std::size_t p = design.p(), d = config.grid.size(), s = config.s;

  TestOutcome out;
  out.curves.p = p;
  out.curves.d = d;
  out.curves.curves.resize(static_cast<Eigen::Index>(s + 1), static_cast<Eigen::Index>(p * d));
  out.observed = recipe.observed(model, dataset);
  out.curves.curves.row(0) = out.observed.transpose();

  const std::size_t workers = std::max<std::size_t>(1, std::min(config.workers, s));
  struct Failure {
    std::size_t index = std::numeric_limits<std::size_t>::max();
    ErrorKind kind = ErrorKind::DidNotConverge;
    std::string message;
  };
  std::vector<Failure> failures(workers);
  auto run = [&](std::size_t w) {
    for (std::size_t i = 1 + w; i <= s; i += workers) {
      try {
        const auto rep = draw_replicate(model, i);
        out.curves.curves.row(static_cast<Eigen::Index>(i)) = recipe.compute(rep).transpose();
      } catch (const Error& e) {
        failures[w] = {i, e.kind(), e.what()};
        return;
      }
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }
  const auto first = std::min_element(failures.begin(), failures.end(),
                                      [](const Failure& a, const Failure& b) { return a.index < b.index; });
  if (first->index != std::numeric_limits<std::size_t>::max())
    throw Error(first->kind, "replicate " + std::to_string(first->index) + ", " + first->message);

  out.envelope = build_envelope(out.curves.curves, config.measure, config.alpha);
  out.comparator_p = comparators(out.curves.curves);
  out.coefficient_labels = design.x_labels;
  out.taus = config.grid.taus();
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t k = 0; k < d; ++k)
      if (out.envelope.outside_mask[j * d + k])
        out.significant_coordinates.push_back({design.x_labels[j], config.grid[k], j * d + k});

  auto& diag = out.diagnostics;
  diag.insert(diag.end(), out.envelope.warnings.begin(), out.envelope.warnings.end());
  if (recipe.extreme_tau_fits() > 0)
    diag.push_back(std::to_string(recipe.extreme_tau_fits()) +
                   " observed fit(s) at extreme tau (n*min(tau,1-tau) < 1)");
  if (model.clamped_scales > 0)
    diag.push_back("RLS: " + std::to_string(model.clamped_scales) + " fitted scale(s) clamped at the floor (" +
                   std::to_string(model.nonpositive_scales) + " non-positive)");
  if (model.flplus_degenerate_taus > 0)
    diag.push_back("FLPLUS: reduced fit did not have exactly q zero residuals at " +
                   std::to_string(model.flplus_degenerate_taus) + " tau value(s)");
  return out;
}

std::vector<double> pointwise_perm_pvalues(const Eigen::MatrixXd& curves) {
  if (curves.rows() < 2) throw Error(ErrorKind::InvalidArgument, "need at least one replicate");
  const Eigen::Index rows = curves.rows();
  std::vector<double> pvals(static_cast<std::size_t>(curves.cols()));
  std::vector<double> reps(static_cast<std::size_t>(rows - 1));
  for (Eigen::Index k = 0; k < curves.cols(); ++k) {
    for (Eigen::Index i = 1; i < rows; ++i) reps[static_cast<std::size_t>(i - 1)] = curves(i, k);
    std::sort(reps.begin(), reps.end());
    const std::size_t m = reps.size();
    const double med = m % 2 ? reps[m / 2] : 0.5 * (reps[m / 2 - 1] + reps[m / 2]);
    const double obs = std::abs(curves(0, k) - med);
    std::size_t count = 0;
    for (Eigen::Index i = 0; i < rows; ++i)
      if (std::abs(curves(i, k) - med) >= obs) ++count;
    pvals[static_cast<std::size_t>(k)] = static_cast<double>(count) / static_cast<double>(rows);
  }
  return pvals;
}

Comparators comparators(const Eigen::MatrixXd& curves) {
  const auto raw = pointwise_perm_pvalues(curves);
  const auto adjusted = holm_adjust(raw);
  return {*std::min_element(adjusted.begin(), adjusted.end()), *std::min_element(raw.begin(), raw.end())};
}

}  // namespace gqr
