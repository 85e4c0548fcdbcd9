#include "globalqr/envelope.hpp"

#include "globalqr/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <sstream>

namespace gqr {

std::string_view to_string(MeasureId id) { return id == MeasureId::ERL ? "ERL" : "AREA"; }

MeasureId parse_measure(std::string_view text) {
  std::string up;
  for (char c : text) up.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (up == "ERL") return MeasureId::ERL;
  if (up == "AREA") return MeasureId::AREA;
  throw Error(ErrorKind::InvalidArgument, "unknown measure '" + std::string(text) + "'");
}

bool GlobalEnvelope::rejects() const { return p_value <= alpha * (1 + 1e-12); }

bool GlobalEnvelope::observed_outside() const {
  return std::find(outside_mask.begin(), outside_mask.end(), true) != outside_mask.end();
}

Eigen::MatrixXd pointwise_ranks(const Eigen::MatrixXd& curves) {
  const Eigen::Index rows = curves.rows();
  Eigen::MatrixXd ranks(rows, curves.cols());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(rows));
  const double mirror = static_cast<double>(rows) + 1.0;  // s + 2
  for (Eigen::Index k = 0; k < curves.cols(); ++k) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return curves(a, k) < curves(b, k); });
    std::size_t start = 0;
    while (start < order.size()) {
      std::size_t end = start + 1;
      while (end < order.size() && curves(order[end], k) == curves(order[start], k)) ++end;
      // positions start+1 .. end share their mean
      const double mid = (static_cast<double>(start + 1) + static_cast<double>(end)) / 2.0;
      const double two_sided = std::min(mid, mirror - mid);
      for (std::size_t t = start; t < end; ++t) ranks(order[t], k) = two_sided;
      start = end;
    }
  }
  return ranks;
}

namespace {

// Rows sorted by lexicographic order of their ascending rank vectors, plus the
// tie-group boundaries in that order.
struct LexOrder {
  std::vector<Eigen::Index> order;
  std::vector<std::size_t> group_start;  // index into `order`; sentinel at end
};

LexOrder lexicographic_order(const Eigen::MatrixXd& ranks) {
  const Eigen::Index rows = ranks.rows();
  Eigen::MatrixXd sorted = ranks;
  for (Eigen::Index i = 0; i < rows; ++i) {
    auto r = sorted.row(i);
    std::sort(r.begin(), r.end());
  }
  auto less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index k = 0; k < sorted.cols(); ++k) {
      if (sorted(a, k) != sorted(b, k)) return sorted(a, k) < sorted(b, k);
    }
    return false;
  };
  LexOrder lo;
  lo.order.resize(static_cast<std::size_t>(rows));
  std::iota(lo.order.begin(), lo.order.end(), Eigen::Index{0});
  std::stable_sort(lo.order.begin(), lo.order.end(), less);
  for (std::size_t t = 0; t < lo.order.size(); ++t)
    if (t == 0 || less(lo.order[t - 1], lo.order[t])) lo.group_start.push_back(t);
  lo.group_start.push_back(lo.order.size());
  return lo;
}

}  // namespace

Eigen::VectorXd erl_measure(const Eigen::MatrixXd& ranks) {
  const auto lo = lexicographic_order(ranks);
  const double total = static_cast<double>(ranks.rows());
  Eigen::VectorXd e(ranks.rows());
  for (std::size_t g = 0; g + 1 < lo.group_start.size(); ++g) {
    const double value = (1.0 + static_cast<double>(lo.group_start[g])) / total;
    for (std::size_t t = lo.group_start[g]; t < lo.group_start[g + 1]; ++t) e(lo.order[t]) = value;
  }
  return e;
}

Eigen::VectorXd area_measure(const Eigen::MatrixXd& curves, const Eigen::MatrixXd& ranks) {
  const auto lo = lexicographic_order(ranks);
  const Eigen::Index rows = curves.rows(), cols = curves.cols();
  const double total = static_cast<double>(rows);
  Eigen::VectorXd e(rows);
  for (std::size_t g = 0; g + 1 < lo.group_start.size(); ++g) {
    const std::size_t begin = lo.group_start[g], end = lo.group_start[g + 1];
    const double value = (1.0 + static_cast<double>(begin)) / total;
    for (std::size_t t = begin; t < end; ++t) e(lo.order[t]) = value;
    if (end - begin < 2 || end == lo.order.size()) continue;

    // Hull of every strictly less extreme row.
    Eigen::VectorXd low = Eigen::VectorXd::Constant(cols, std::numeric_limits<double>::infinity());
    Eigen::VectorXd high = -low;
    for (std::size_t t = end; t < lo.order.size(); ++t) {
      low = low.cwiseMin(curves.row(lo.order[t]).transpose());
      high = high.cwiseMax(curves.row(lo.order[t]).transpose());
    }
    for (std::size_t t = begin; t < end; ++t) {
      const Eigen::Index i = lo.order[t];
      double area = 0;
      for (Eigen::Index k = 0; k < cols; ++k) {
        const double width = high(k) - low(k) > 0 ? high(k) - low(k) : 1.0;
        area += (std::max(0.0, low(k) - curves(i, k)) + std::max(0.0, curves(i, k) - high(k))) / width;
      }
      area /= static_cast<double>(cols);
      // stays strictly above the next more extreme ERL level
      e(i) = value - (area / (1.0 + area)) / total;
    }
  }
  return e;
}

Eigen::VectorXd compute_measure(const Eigen::MatrixXd& curves, MeasureId measure) {
  const auto ranks = pointwise_ranks(curves);
  return measure == MeasureId::ERL ? erl_measure(ranks) : area_measure(curves, ranks);
}

GlobalEnvelope build_envelope(const Eigen::MatrixXd& curves, MeasureId measure, double alpha) {
  if (curves.rows() < 2) throw Error(ErrorKind::InvalidArgument, "envelope needs at least one replicate (s >= 1)");
  if (curves.cols() < 1) throw Error(ErrorKind::InvalidArgument, "envelope needs at least one coordinate");
  if (!(alpha > 0 && alpha < 1)) throw Error(ErrorKind::InvalidArgument, "alpha must lie in (0,1)");
  if (!curves.allFinite()) throw Error(ErrorKind::InvalidData, "test vectors contain non-finite values");

  const Eigen::Index rows = curves.rows(), cols = curves.cols();
  const double total = static_cast<double>(rows);
  GlobalEnvelope env;
  env.alpha = alpha;
  env.measures = compute_measure(curves, measure);
  const auto& e = env.measures;

  const double limit = alpha * total * (1 + 1e-12);
  if (limit < 1.0) {
    std::ostringstream msg;
    msg << "alpha*(s+1) = " << alpha * total << " < 1: no replicate can be excluded; use s >= "
        << static_cast<long>(std::ceil(1.0 / alpha)) - 1;
    env.warnings.push_back(msg.str());
  }

  // E_(alpha): the largest E_i with #{E_j < E_i} <= alpha (s+1).
  std::vector<double> sorted(e.data(), e.data() + rows);
  std::sort(sorted.begin(), sorted.end());
  double cut = sorted.front();
  for (std::size_t t = 0; t < sorted.size(); ++t) {
    if (t > 0 && sorted[t] == sorted[t - 1]) continue;
    if (static_cast<double>(t) <= limit) cut = sorted[t];  // t values lie strictly below sorted[t]
  }

  env.lower = Eigen::VectorXd::Constant(cols, std::numeric_limits<double>::infinity());
  env.upper = -env.lower;
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (e(i) < cut) continue;
    ++env.kept;
    env.lower = env.lower.cwiseMin(curves.row(i).transpose());
    env.upper = env.upper.cwiseMax(curves.row(i).transpose());
  }

  env.central.resize(cols);
  std::vector<double> column(static_cast<std::size_t>(rows - 1));
  for (Eigen::Index k = 0; k < cols; ++k) {
    for (Eigen::Index i = 1; i < rows; ++i) column[static_cast<std::size_t>(i - 1)] = curves(i, k);
    std::sort(column.begin(), column.end());
    const std::size_t m = column.size();
    env.central(k) = m % 2 ? column[m / 2] : 0.5 * (column[m / 2 - 1] + column[m / 2]);
  }

  const auto at_least_as_extreme = std::count_if(e.data(), e.data() + rows, [&](double v) { return v <= e(0); });
  env.p_value = static_cast<double>(at_least_as_extreme) / total;

  env.outside_mask.resize(static_cast<std::size_t>(cols));
  for (Eigen::Index k = 0; k < cols; ++k)
    env.outside_mask[static_cast<std::size_t>(k)] = curves(0, k) < env.lower(k) || curves(0, k) > env.upper(k);
  return env;
}

std::vector<double> holm_adjust(const std::vector<double>& pvalues) {
  const std::size_t m = pvalues.size();
  for (double p : pvalues)
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::InvalidArgument, "p-values must lie in [0,1]");
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pvalues[a] < pvalues[b]; });
  std::vector<double> adjusted(m);
  double running = 0;
  for (std::size_t j = 0; j < m; ++j) {
    running = std::max(running, std::min(1.0, static_cast<double>(m - j) * pvalues[order[j]]));
    adjusted[order[j]] = running;
  }
  return adjusted;
}

}  // namespace gqr
