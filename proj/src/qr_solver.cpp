#include "globalqr/qr_solver.hpp"

#include "globalqr/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace gqr {

namespace {

void check_tau(double tau) {
  if (!(tau > 0.0 && tau < 1.0))
    throw Error(ErrorKind::InvalidTau, "tau must lie in (0,1), got " + std::to_string(tau));
}

inline double psi(double r, double tau) { return r < 0 ? tau - 1.0 : tau; }

// Right derivative of rho_tau(-a t) at t = 0, i.e. a residual sitting at zero
// that moves with rate -a.
inline double kink_rate(double a, double tau) { return std::max(-tau * a, (1.0 - tau) * a); }

struct Breakpoint {
  double t;
  double weight;
  Eigen::Index row;
};

}  // namespace

double check_loss(double u, double tau) {
  check_tau(tau);
  return u >= 0 ? u * tau : -u * (1.0 - tau);
}

double zero_tolerance(const Eigen::VectorXd& y) {
  return 1e-8 * (1.0 + (y.size() ? y.cwiseAbs().maxCoeff() : 0.0));
}

QrSolver::QrSolver(const Eigen::MatrixXd& design) : n_(design.rows()), m_(design.cols()) {
  if (m_ < 1 || n_ < m_)
    throw Error(ErrorKind::RankDeficientDesign, "design must satisfy n >= m >= 1");
  if (!has_full_column_rank(design))
    throw Error(ErrorKind::RankDeficientDesign, "design matrix is rank deficient");
  xr_.resize(static_cast<std::size_t>(n_ * m_));
  for (Eigen::Index i = 0; i < n_; ++i)
    for (Eigen::Index j = 0; j < m_; ++j) xr_[static_cast<std::size_t>(i * m_ + j)] = design(i, j);
}

std::vector<Eigen::Index> QrSolver::initial_basis(const Eigen::VectorXd& y, double tau) const {
  // Rows whose response is closest to the unconditional tau-quantile come
  // first; keep each one that adds a new direction to the span.
  std::vector<double> sorted(y.data(), y.data() + n_);
  const auto kth = static_cast<std::size_t>(std::floor(tau * static_cast<double>(n_ - 1)));
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(kth), sorted.end());
  const double target = sorted[kth];

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n_));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(y(a) - target) < std::abs(y(b) - target);
  });

  std::vector<Eigen::Index> basis;
  std::vector<Eigen::VectorXd> ortho;
  for (Eigen::Index i : order) {
    Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(row(i), m_);
    const double norm0 = v.norm();
    if (norm0 == 0) continue;
    for (const auto& u : ortho) v -= u.dot(v) * u;
    if (v.norm() <= 1e-8 * norm0) continue;
    ortho.push_back(v.normalized());
    basis.push_back(i);
    if (static_cast<Eigen::Index>(basis.size()) == m_) break;
  }
  if (static_cast<Eigen::Index>(basis.size()) != m_)
    throw Error(ErrorKind::RankDeficientDesign, "design matrix is rank deficient");
  return basis;
}

QrFit QrSolver::fit(const Eigen::VectorXd& y, double tau, const std::vector<Eigen::Index>* start) const {
  check_tau(tau);
  if (y.size() != n_) throw Error(ErrorKind::DimensionMismatch, "response length does not match design rows");

  const Eigen::Index n = n_, m = m_;
  const double tol = zero_tolerance(y);

  std::vector<Eigen::Index> basis;
  if (start && static_cast<Eigen::Index>(start->size()) == m &&
      std::all_of(start->begin(), start->end(), [&](Eigen::Index i) { return i >= 0 && i < n; })) {
    basis = *start;
  }

  Eigen::MatrixXd B(m, m);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  auto factor = [&]() {
    for (Eigen::Index k = 0; k < m; ++k)
      for (Eigen::Index j = 0; j < m; ++j) B(k, j) = row(basis[static_cast<std::size_t>(k)])[j];
    lu.compute(B);
    return lu.rcond() > 1e-13;
  };
  if (basis.empty() || !factor()) {
    basis = initial_basis(y, tau);
    if (!factor()) throw Error(ErrorKind::RankDeficientDesign, "could not find a nonsingular starting basis");
  }

  Eigen::VectorXd beta(m), r(n), yb(m), g(m), xi(m), d(m), a(n);
  std::vector<char> in_basis(static_cast<std::size_t>(n), 0);
  std::vector<Eigen::Index> zero_nonbasic;
  std::vector<Breakpoint> breaks;
  breaks.reserve(static_cast<std::size_t>(n));

  auto residuals = [&]() {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double* x = row(i);
      double fitted = 0;
      for (Eigen::Index j = 0; j < m; ++j) fitted += x[j] * beta(j);
      r(i) = y(i) - fitted;
    }
    for (Eigen::Index i : basis) r(i) = 0.0;
  };

  // Moves along direction d (slope at 0+ is `slope`) to the minimiser of the
  // objective on the ray; returns the row whose residual hits zero there.
  auto line_search = [&](double slope) -> Eigen::Index {
    breaks.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double* x = row(i);
      double ai = 0;
      for (Eigen::Index j = 0; j < m; ++j) ai += x[j] * d(j);
      a(i) = ai;
      if (std::abs(r(i)) <= tol || ai == 0.0) continue;
      const double t = r(i) / ai;
      if (t > 0) breaks.push_back({t, std::abs(ai), i});
    }
    std::sort(breaks.begin(), breaks.end(), [](const Breakpoint& lhs, const Breakpoint& rhs) {
      return lhs.t < rhs.t || (lhs.t == rhs.t && lhs.row < rhs.row);
    });
    for (const auto& bp : breaks) {
      slope += bp.weight;
      if (slope >= 0) return bp.row;
    }
    return -1;
  };

  const std::size_t max_iter = static_cast<std::size_t>(50 * n + 50);
  std::size_t iter = 0;
  bool optimal = false;
  for (; iter < max_iter; ++iter) {
    for (Eigen::Index k = 0; k < m; ++k) yb(k) = y(basis[static_cast<std::size_t>(k)]);
    beta = lu.solve(yb);
    std::fill(in_basis.begin(), in_basis.end(), 0);
    for (Eigen::Index i : basis) in_basis[static_cast<std::size_t>(i)] = 1;
    residuals();

    g.setZero();
    zero_nonbasic.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (in_basis[static_cast<std::size_t>(i)]) continue;
      if (std::abs(r(i)) <= tol) {
        zero_nonbasic.push_back(i);
        continue;
      }
      const double w = psi(r(i), tau);
      const double* x = row(i);
      for (Eigen::Index j = 0; j < m; ++j) g(j) += w * x[j];
    }
    xi = lu.transpose().solve(g);

    // w_i = B^{-T} x_i for degenerate nonbasic rows: edge j moves them at rate sigma * w_ij.
    std::vector<Eigen::VectorXd> wz;
    wz.reserve(zero_nonbasic.size());
    for (Eigen::Index i : zero_nonbasic)
      wz.push_back(lu.transpose().solve(Eigen::Map<const Eigen::VectorXd>(row(i), m)));

    const double eps = 1e-10 * std::max(1.0, xi.cwiseAbs().maxCoeff());
    double best = -eps;
    Eigen::Index best_j = -1;
    double best_sigma = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
      for (double sigma : {1.0, -1.0}) {
        double D = -sigma * xi(j) + (sigma > 0 ? 1.0 - tau : tau);
        for (const auto& w : wz) D += kink_rate(sigma * w(j), tau);
        if (D < best) {
          best = D;
          best_j = j;
          best_sigma = sigma;
        }
      }
    }

    if (best_j >= 0) {
      d = lu.solve(Eigen::VectorXd::Unit(m, best_j)) * best_sigma;
      const Eigen::Index entering = line_search(best);
      if (entering < 0) throw Error(ErrorKind::DidNotConverge, "objective unbounded along an edge");
      basis[static_cast<std::size_t>(best_j)] = entering;
      if (!factor()) throw Error(ErrorKind::DidNotConverge, "basis became singular");
      continue;
    }
    if (zero_nonbasic.empty()) {
      optimal = true;
      break;
    }

    // Degenerate vertex: every edge of the objective's local arrangement is the
    // null direction of m-1 independent zero-residual rows.
    std::vector<Eigen::Index> zeros = basis;
    zeros.insert(zeros.end(), zero_nonbasic.begin(), zero_nonbasic.end());
    std::sort(zeros.begin(), zeros.end());
    const std::size_t kz = zeros.size();
    const std::size_t pick = static_cast<std::size_t>(m - 1);
    std::vector<std::size_t> idx(pick);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    bool moved = false;
    std::size_t visited = 0;
    while (!moved) {
      if (++visited > 200000) throw Error(ErrorKind::DidNotConverge, "degenerate vertex too large to resolve");
      Eigen::VectorXd dir(m);
      bool ok = true;
      if (pick == 0) {
        dir.setOnes();
      } else {
        Eigen::MatrixXd S(static_cast<Eigen::Index>(pick), m);
        for (std::size_t k = 0; k < pick; ++k)
          S.row(static_cast<Eigen::Index>(k)) = Eigen::Map<const Eigen::RowVectorXd>(row(zeros[idx[k]]), m);
        Eigen::FullPivLU<Eigen::MatrixXd> slu(S);
        slu.setThreshold(1e-10);
        if (slu.rank() != static_cast<Eigen::Index>(pick)) {
          ok = false;
        } else {
          dir = slu.kernel().col(0).normalized();
        }
      }
      if (ok) {
        for (double sigma : {1.0, -1.0}) {
          d = sigma * dir;
          double D = 0;
          for (Eigen::Index i = 0; i < n; ++i) {
            const double* x = row(i);
            double ai = 0;
            for (Eigen::Index j = 0; j < m; ++j) ai += x[j] * d(j);
            D += std::abs(r(i)) <= tol ? kink_rate(ai, tau) : -ai * psi(r(i), tau);
          }
          if (D < -1e-10) {
            const Eigen::Index entering = line_search(D);
            if (entering < 0) throw Error(ErrorKind::DidNotConverge, "objective unbounded along an edge");
            basis.clear();
            for (std::size_t k = 0; k < pick; ++k) basis.push_back(zeros[idx[k]]);
            basis.push_back(entering);
            if (!factor()) throw Error(ErrorKind::DidNotConverge, "basis became singular");
            moved = true;
            break;
          }
        }
      }
      if (moved) break;
      // next (m-1)-combination of the zero rows
      std::size_t k = pick;
      while (k > 0 && idx[k - 1] == kz - pick + k - 1) --k;
      if (k == 0) break;
      ++idx[k - 1];
      for (std::size_t l = k; l < pick; ++l) idx[l] = idx[l - 1] + 1;
    }
    if (!moved) {
      optimal = true;
      break;
    }
  }
  if (!optimal) {
    std::ostringstream msg;
    msg << "quantile fit at tau=" << tau << " hit the iteration cap (" << max_iter << ")";
    throw Error(ErrorKind::DidNotConverge, msg.str());
  }

  QrFit out;
  out.tau = tau;
  out.beta = beta;
  out.residuals = r;
  out.loss = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    out.loss += check_loss(r(i), tau);
    if (std::abs(r(i)) <= tol) ++out.n_zero;
  }
  out.extreme_tau = static_cast<double>(n) * std::min(tau, 1.0 - tau) < 1.0;
  out.basis = basis;
  out.iterations = iter;
  return out;
}

QrFit qr_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, double tau) {
  check_tau(tau);
  if (y.size() != design.rows()) throw Error(ErrorKind::DimensionMismatch, "response length does not match design rows");
  return QrSolver(design).fit(y, tau);
}

std::vector<QrFit> qr_fit_grid(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                               const QuantileGrid& grid) {
  if (y.size() != design.rows()) throw Error(ErrorKind::DimensionMismatch, "response length does not match design rows");
  const QrSolver solver(design);
  std::vector<QrFit> fits;
  fits.reserve(grid.size());
  for (double tau : grid.taus()) {
    try {
      fits.push_back(solver.fit(y, tau, fits.empty() ? nullptr : &fits.back().basis));
    } catch (const Error& e) {
      std::ostringstream msg;
      msg << "tau=" << tau << ": " << e.what();
      throw Error(e.kind(), msg.str());
    }
  }
  return fits;
}

OlsFit ols_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& y) {
  if (y.size() != design.rows()) throw Error(ErrorKind::DimensionMismatch, "response length does not match design rows");
  if (design.cols() < 1 || design.rows() < design.cols() || !has_full_column_rank(design))
    throw Error(ErrorKind::RankDeficientDesign, "least squares design is rank deficient");
  OlsFit out;
  out.beta = design.colPivHouseholderQr().solve(y);
  out.fitted = design * out.beta;
  out.residuals = y - out.fitted;
  return out;
}

}  // namespace gqr
