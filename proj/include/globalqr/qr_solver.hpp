#pragma once

// Linear quantile regression by exact minimisation of the check loss.
//
// The objective sum_i rho_tau(y_i - x_i'b) is convex and piecewise linear, and
// its minimum is attained at a basic solution: m observations interpolated
// exactly. The solver walks between such vertices. From the current vertex it
// evaluates the directional derivative along each edge (releasing one basic
// observation up or down), takes the steepest descending edge and moves along
// it to the minimiser of the objective on that ray (a weighted-median search
// over the breakpoints, so one step may pass many vertices). Degenerate
// vertices, where more than m residuals vanish, are handled by enumerating the
// edges spanned by the zero-residual rows.

#include "globalqr/core.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace gqr {

/// rho_tau(u) = u*tau for u >= 0 and -u*(1-tau) for u < 0.
double check_loss(double u, double tau);

/// Scale-aware threshold below which a residual counts as zero.
double zero_tolerance(const Eigen::VectorXd& y);

struct QrFit {
  double tau = 0.5;
  Eigen::VectorXd beta;
  double loss = 0.0;
  Eigen::VectorXd residuals;
  std::size_t n_zero = 0;
  /// n * min(tau, 1 - tau) < 1: the fit is an extreme order statistic of very few points.
  bool extreme_tau = false;
  /// Rows interpolated by the returned basic solution.
  std::vector<Eigen::Index> basis;
  std::size_t iterations = 0;
};

/// Fits many responses against one design; keeps a row-major copy of the design.
class QrSolver {
 public:
  explicit QrSolver(const Eigen::MatrixXd& design);

  Eigen::Index rows() const { return n_; }
  Eigen::Index cols() const { return m_; }

  /// `start` is an optional initial basis (for example the optimum at a
  /// neighbouring tau); it is ignored if it is not a nonsingular basis.
  QrFit fit(const Eigen::VectorXd& y, double tau,
            const std::vector<Eigen::Index>* start = nullptr) const;

 private:
  const double* row(Eigen::Index i) const { return xr_.data() + i * m_; }
  std::vector<Eigen::Index> initial_basis(const Eigen::VectorXd& y, double tau) const;

  Eigen::Index n_;
  Eigen::Index m_;
  std::vector<double> xr_;
};

QrFit qr_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, double tau);

/// One fit per tau, in grid order; each fit is warm-started from the previous optimum.
std::vector<QrFit> qr_fit_grid(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                               const QuantileGrid& grid);

struct OlsFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd fitted;
  Eigen::VectorXd residuals;
};

OlsFit ols_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& y);

}  // namespace gqr
