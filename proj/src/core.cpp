#include "globalqr/core.hpp"

#include "globalqr/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

namespace gqr {

std::vector<std::string> Column::levels() const {
  std::set<std::string> distinct(labels.begin(), labels.end());
  return {distinct.begin(), distinct.end()};
}

Column Column::continuous(std::string name, std::vector<double> values) {
  Column c;
  c.name = std::move(name);
  c.type = ColumnType::Continuous;
  c.numeric = std::move(values);
  return c;
}

Column Column::categorical(std::string name, std::vector<std::string> labels) {
  Column c;
  c.name = std::move(name);
  c.type = ColumnType::Categorical;
  c.labels = std::move(labels);
  return c;
}

Column Column::categorical_from_numbers(std::string name, const std::vector<double>& values) {
  std::vector<std::string> labels;
  labels.reserve(values.size());
  char buf[64];
  for (double v : values) {
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    labels.emplace_back(buf, res.ptr);
  }
  return categorical(std::move(name), std::move(labels));
}

Dataset::Dataset(std::string response_name, std::vector<double> y, std::vector<Column> columns,
                 std::vector<std::string> interesting, std::vector<std::string> nuisance)
    : response_name_(std::move(response_name)),
      y_(std::move(y)),
      columns_(std::move(columns)),
      interesting_(std::move(interesting)),
      nuisance_(std::move(nuisance)) {
  const std::size_t n = y_.size();
  if (n < 2) throw Error(ErrorKind::InvalidData, "dataset needs at least 2 rows");
  for (double v : y_)
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidData, "response has missing or non-finite values");
  for (const auto& c : columns_) {
    if (c.size() != n)
      throw Error(ErrorKind::InvalidData, "column '" + c.name + "' has length " +
                                              std::to_string(c.size()) + ", expected " + std::to_string(n));
    if (c.type == ColumnType::Continuous) {
      for (double v : c.numeric)
        if (!std::isfinite(v))
          throw Error(ErrorKind::InvalidData, "column '" + c.name + "' has missing or non-finite values");
    } else {
      for (const auto& l : c.labels)
        if (l.empty()) throw Error(ErrorKind::InvalidData, "column '" + c.name + "' has missing values");
      if (c.levels().size() < 2)
        throw Error(ErrorKind::InvalidData, "categorical column '" + c.name + "' has fewer than 2 levels");
    }
  }
  std::set<std::string> seen;
  for (const auto* role : {&interesting_, &nuisance_}) {
    for (const auto& name : *role) {
      column(name);
      if (!seen.insert(name).second)
        throw Error(ErrorKind::InvalidData, "column '" + name + "' assigned to more than one role");
    }
  }
}

const Column& Dataset::column(std::string_view name) const {
  for (const auto& c : columns_)
    if (c.name == name) return c;
  throw Error(ErrorKind::InvalidData, "unknown column '" + std::string(name) + "'");
}

bool Dataset::all_nuisance_categorical() const {
  return std::all_of(nuisance_.begin(), nuisance_.end(), [&](const std::string& name) {
    return column(name).type == ColumnType::Categorical;
  });
}

Dataset Dataset::with_response(std::vector<double> y) const {
  return Dataset(response_name_, std::move(y), columns_, interesting_, nuisance_);
}

QuantileGrid::QuantileGrid(std::vector<double> taus) : taus_(std::move(taus)) {
  if (taus_.empty()) throw Error(ErrorKind::InvalidTau, "quantile grid is empty");
  for (std::size_t k = 0; k < taus_.size(); ++k) {
    const double t = taus_[k];
    if (!(t > 0.0 && t < 1.0))
      throw Error(ErrorKind::InvalidTau, "tau must lie in (0,1), got " + std::to_string(t));
    if (k > 0 && !(t > taus_[k - 1]))
      throw Error(ErrorKind::InvalidTau, "quantile grid must be strictly increasing");
  }
}

QuantileGrid QuantileGrid::equally_spaced(std::size_t d, double lo, double hi) {
  if (d == 0) throw Error(ErrorKind::InvalidTau, "quantile grid is empty");
  if (d == 1) return QuantileGrid({lo});
  std::vector<double> taus(d);
  for (std::size_t k = 0; k < d; ++k)
    taus[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(d - 1);
  taus.back() = hi;
  return QuantileGrid(std::move(taus));
}

namespace {

double parse_double(std::string_view text) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  double v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw Error(ErrorKind::InvalidTau, "cannot parse '" + std::string(text) + "' as a number");
  return v;
}

}  // namespace

QuantileGrid QuantileGrid::parse(std::string_view spec) {
  if (auto at = spec.find('@'); at != std::string_view::npos) {
    const auto colon = spec.find(':', at);
    if (colon == std::string_view::npos)
      throw Error(ErrorKind::InvalidTau, "grid spec must look like d@lo:hi");
    const double d = parse_double(spec.substr(0, at));
    if (d < 1 || d != std::floor(d)) throw Error(ErrorKind::InvalidTau, "grid size must be a positive integer");
    return equally_spaced(static_cast<std::size_t>(d), parse_double(spec.substr(at + 1, colon - at - 1)),
                          parse_double(spec.substr(colon + 1)));
  }
  std::vector<double> taus;
  std::size_t start = 0;
  while (start <= spec.size()) {
    auto comma = spec.find(',', start);
    if (comma == std::string_view::npos) comma = spec.size();
    taus.push_back(parse_double(spec.substr(start, comma - start)));
    start = comma + 1;
  }
  return QuantileGrid(std::move(taus));
}

Eigen::MatrixXd DesignMatrices::full() const {
  Eigen::MatrixXd m(x.rows(), x.cols() + z.cols());
  m << x, z;
  return m;
}

Eigen::MatrixXd DesignMatrices::intercept_and_x() const {
  Eigen::MatrixXd m(x.rows(), x.cols() + 1);
  m.col(0).setOnes();
  m.rightCols(x.cols()) = x;
  return m;
}

bool has_full_column_rank(const Eigen::MatrixXd& m, double rel_tol) {
  if (m.cols() == 0) return true;
  if (m.rows() < m.cols()) return false;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  return sv(0) > 0 && sv(sv.size() - 1) / sv(0) > rel_tol;
}

namespace {

void append_columns(const Column& c, std::vector<Eigen::VectorXd>& cols,
                    std::vector<std::string>& labels) {
  const auto n = static_cast<Eigen::Index>(c.size());
  if (c.type == ColumnType::Continuous) {
    cols.emplace_back(Eigen::Map<const Eigen::VectorXd>(c.numeric.data(), n));
    labels.push_back(c.name);
    return;
  }
  const auto levels = c.levels();
  for (std::size_t l = 1; l < levels.size(); ++l) {
    Eigen::VectorXd dummy(n);
    for (Eigen::Index i = 0; i < n; ++i) dummy(i) = c.labels[static_cast<std::size_t>(i)] == levels[l] ? 1.0 : 0.0;
    cols.push_back(std::move(dummy));
    labels.push_back(c.name + "[" + levels[l] + "]");
  }
}

Eigen::MatrixXd stack(const std::vector<Eigen::VectorXd>& cols, Eigen::Index n) {
  Eigen::MatrixXd m(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = cols[j];
  return m;
}

}  // namespace

DesignMatrices build_design(const Dataset& dataset) {
  if (dataset.interesting().empty())
    throw Error(ErrorKind::EmptyInteresting, "no interesting covariate given");
  const auto n = static_cast<Eigen::Index>(dataset.n());

  DesignMatrices dm;
  std::vector<Eigen::VectorXd> xcols, zcols;
  for (const auto& name : dataset.interesting()) append_columns(dataset.column(name), xcols, dm.x_labels);
  zcols.push_back(Eigen::VectorXd::Ones(n));
  dm.z_labels.push_back("(Intercept)");
  for (const auto& name : dataset.nuisance()) append_columns(dataset.column(name), zcols, dm.z_labels);

  dm.x = stack(xcols, n);
  dm.z = stack(zcols, n);
  if (!has_full_column_rank(dm.z))
    throw Error(ErrorKind::RankDeficientNuisance, "nuisance design matrix is rank deficient");
  return dm;
}

Eigen::VectorXd assemble_test_vector(const Eigen::MatrixXd& beta_by_tau, std::size_t p,
                                     std::size_t d) {
  if (static_cast<std::size_t>(beta_by_tau.rows()) != p || static_cast<std::size_t>(beta_by_tau.cols()) != d) {
    std::ostringstream msg;
    msg << "coefficient matrix is " << beta_by_tau.rows() << "x" << beta_by_tau.cols() << ", expected " << p
        << "x" << d;
    throw Error(ErrorKind::DimensionMismatch, msg.str());
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(p * d));
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t k = 0; k < d; ++k)
      out(static_cast<Eigen::Index>(j * d + k)) = beta_by_tau(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
  return out;
}

Eigen::MatrixXd disassemble_test_vector(const Eigen::VectorXd& vec, std::size_t p, std::size_t d) {
  if (static_cast<std::size_t>(vec.size()) != p * d)
    throw Error(ErrorKind::DimensionMismatch, "test vector length does not match p*d");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(d));
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t k = 0; k < d; ++k)
      out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = vec(static_cast<Eigen::Index>(j * d + k));
  return out;
}

}  // namespace gqr
