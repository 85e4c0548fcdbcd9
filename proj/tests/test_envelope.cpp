#include "doctest.h"

#include "globalqr/envelope.hpp"
#include "globalqr/error.hpp"
#include "globalqr/rng.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <random>

using namespace gqr;

namespace {

Eigen::MatrixXd normal_curves(PhiloxStream& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = normal(rng);
  return m;
}

// Curves with a mix of shapes: smooth trends, heavy tails and coarse rounding (ties).
Eigen::MatrixXd varied_curves(PhiloxStream& rng) {
  std::normal_distribution<double> normal;
  std::student_t_distribution<double> heavy(2.0);
  const auto rows = static_cast<Eigen::Index>(2 + rng.below(60));
  const auto cols = static_cast<Eigen::Index>(1 + rng.below(25));
  const auto kind = rng.below(4);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double level = normal(rng);
    for (Eigen::Index k = 0; k < cols; ++k) {
      double v = 0;
      switch (kind) {
        case 0: v = normal(rng); break;
        case 1: v = level * static_cast<double>(k) + 0.3 * normal(rng); break;
        case 2: v = heavy(rng); break;
        default: v = std::round(2 * normal(rng)); break;
      }
      m(i, k) = v;
    }
  }
  if (rng.below(3) == 0) m.row(0) *= 1.0 + 3.0 * rng.uniform();
  if (rows > 2 && rng.below(10) == 0) m.row(0) = m.row(1);
  return m;
}

}  // namespace

TEST_CASE("pointwise two-sided ranks") {
  Eigen::MatrixXd c(3, 1);
  c << 1, 2, 3;
  CHECK(pointwise_ranks(c) == Eigen::Vector3d(1, 2, 1));  // min(r, s+2-r) with s = 2

  Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(4, 1, 7.0);
  CHECK(pointwise_ranks(flat) == Eigen::Vector4d::Constant(2.5));

  PhiloxStream rng(4, 4);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd m(5, 3);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = static_cast<double>(rng.below(4));
    const Eigen::MatrixXd asc = oracle::counting_midranks(m);
    const Eigen::MatrixXd expected = asc.cwiseMin(Eigen::MatrixXd::Constant(5, 3, 6.0) - asc);
    CHECK(pointwise_ranks(m) == expected);
  }
}

TEST_CASE("extreme rank length ordering") {
  Eigen::MatrixXd ranks(2, 3);
  ranks << 5, 1, 2, 3, 3, 1;
  auto e = erl_measure(ranks);
  CHECK(e(0) < e(1));

  Eigen::MatrixXd same = Eigen::MatrixXd::Constant(4, 3, 2.0);
  auto flat = erl_measure(same);
  CHECK((flat.array() == flat(0)).all());

  // pairwise lexicographic comparator as the oracle
  PhiloxStream rng(8, 1);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd r(4, 2);
    for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = static_cast<double>(1 + rng.below(3));
    auto measure = erl_measure(r);
    for (Eigen::Index i = 0; i < 4; ++i) {
      std::vector<double> ri = {r(i, 0), r(i, 1)};
      std::sort(ri.begin(), ri.end());
      int smaller = 0;
      for (Eigen::Index j = 0; j < 4; ++j) {
        std::vector<double> rj = {r(j, 0), r(j, 1)};
        std::sort(rj.begin(), rj.end());
        if (rj < ri) ++smaller;
      }
      CHECK(measure(i) == doctest::Approx((1.0 + smaller) / 4.0));
    }
  }
}

TEST_CASE("area measure refines ERL only on ties") {
  PhiloxStream rng(12, 0);
  auto curves = normal_curves(rng, 30, 8);
  const auto ranks = pointwise_ranks(curves);
  CHECK(area_measure(curves, ranks) == erl_measure(ranks));

  curves.row(5) = curves.row(3);
  const auto r2 = pointwise_ranks(curves);
  const auto a2 = area_measure(curves, r2);
  CHECK(a2(5) == a2(3));

  // rows 0 and 1 tie on ERL; row 1 leaves the hull of the less extreme rows by more
  Eigen::MatrixXd tied(6, 4);
  tied << 19, 7, 25, 22, 15, 10, 1, 11, 10, 17, 23, 8, 23, 23, 16, 18, 23, 1, 14, 16, 25, 13, 18, 27;
  const auto tr = pointwise_ranks(tied);
  const auto erl = erl_measure(tr);
  REQUIRE(erl(0) == erl(1));
  const auto area = area_measure(tied, tr);
  CHECK(area(1) < area(0));
  // refinement keeps the ERL order between different ERL levels
  for (Eigen::Index i = 0; i < 6; ++i)
    for (Eigen::Index j = 0; j < 6; ++j)
      if (erl(i) < erl(j)) CHECK(area(i) < area(j));
}

TEST_CASE("envelope with s = 19 excludes exactly one row") {
  PhiloxStream rng(19, 19);
  int rejections = 0;
  for (int trial = 0; trial < 200; ++trial) {
    auto curves = normal_curves(rng, 20, 5);
    auto env = build_envelope(curves, MeasureId::ERL, 0.05);
    // a tie at the most extreme ERL level means nothing can be excluded
    const bool unique_min = (env.measures.array() == env.measures.minCoeff()).count() == 1;
    CHECK(env.kept == (unique_min ? 19u : 20u));
    const bool unique_most_extreme = (env.measures.array() <= env.measures(0)).count() == 1;
    CHECK(env.rejects() == unique_most_extreme);
    if (env.rejects()) {
      CHECK(env.p_value == doctest::Approx(1.0 / 20));
      ++rejections;
    }
    CHECK(env.rejects() == env.observed_outside());
  }
  CHECK(rejections > 0);
}

TEST_CASE("ties with the observed row count as extreme") {
  PhiloxStream rng(2, 9);
  auto curves = normal_curves(rng, 20, 4);
  curves.row(0) = curves.row(7);
  auto env = build_envelope(curves, MeasureId::ERL, 0.05);
  CHECK(env.p_value >= 2.0 / 20);
  CHECK_FALSE(env.observed_outside());

  Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(20, 5, 1.0);
  CHECK(build_envelope(flat, MeasureId::AREA, 0.05).p_value == 1.0);
}

TEST_CASE("small s relative to alpha warns and keeps the full hull") {
  PhiloxStream rng(3, 3);
  auto curves = normal_curves(rng, 10, 3);
  auto env = build_envelope(curves, MeasureId::ERL, 0.05);
  CHECK(env.kept == 10);
  CHECK_FALSE(env.warnings.empty());
  CHECK_FALSE(env.rejects());
  CHECK_THROWS_AS(build_envelope(curves.topRows(1), MeasureId::ERL, 0.05), Error);
  CHECK_THROWS_AS(build_envelope(curves, MeasureId::ERL, 1.5), Error);
}

TEST_CASE("envelope properties on randomized curve sets") {
  PhiloxStream rng(404, 0);
  for (int trial = 0; trial < 300; ++trial) {
    const auto curves = varied_curves(rng);
    const double alpha = 0.02 + 0.2 * rng.uniform();
    for (auto measure : {MeasureId::ERL, MeasureId::AREA}) {
      auto env = build_envelope(curves, measure, alpha);
      // graphical correspondence
      CHECK(env.rejects() == env.observed_outside());
      CHECK((env.lower.array() <= env.upper.array()).all());
      // every kept row lies inside the band
      std::vector<double> desc(env.measures.data(), env.measures.data() + env.measures.size());
      std::sort(desc.rbegin(), desc.rend());
      const double threshold = desc[env.kept - 1];
      for (Eigen::Index i = 0; i < curves.rows(); ++i) {
        if (env.measures(i) < threshold) continue;
        CHECK(((curves.row(i).transpose().array() >= env.lower.array()) &&
               (curves.row(i).transpose().array() <= env.upper.array())).all());
      }
      // a larger alpha gives a band that sits inside the smaller-alpha band
      auto wider = build_envelope(curves, measure, alpha / 2);
      CHECK((wider.lower.array() <= env.lower.array()).all());
      CHECK((wider.upper.array() >= env.upper.array()).all());
    }
  }
}

TEST_CASE("monotone column transforms leave the test unchanged") {
  PhiloxStream rng(21, 21);
  for (int trial = 0; trial < 50; ++trial) {
    auto curves = normal_curves(rng, 40, 6);
    Eigen::MatrixXd transformed = curves;
    for (Eigen::Index k = 0; k < 6; ++k)
      for (Eigen::Index i = 0; i < 40; ++i)
        transformed(i, k) = k % 2 ? std::exp(curves(i, k)) : std::pow(curves(i, k), 3) + 2.0 * static_cast<double>(k);
    for (auto measure : {MeasureId::ERL, MeasureId::AREA}) {
      auto a = build_envelope(curves, measure, 0.1);
      auto b = build_envelope(transformed, measure, 0.1);
      CHECK(a.measures == b.measures);
      CHECK(a.p_value == b.p_value);
      CHECK(a.outside_mask == b.outside_mask);
      CHECK(std::exp(a.upper(1)) == doctest::Approx(b.upper(1)));
    }
  }
}

TEST_CASE("exactness under exchangeable rows (short run)") {
  PhiloxStream rng(55, 0);
  int rejections = 0;
  const int repeats = 2000;
  for (int r = 0; r < repeats; ++r)
    if (build_envelope(normal_curves(rng, 100, 10), MeasureId::ERL, 0.05).rejects()) ++rejections;
  // binomial sd at 2000 repeats is about 0.0049
  CHECK(std::abs(rejections / static_cast<double>(repeats) - 0.05) < 0.015);
}

TEST_CASE("holm step-down") {
  auto a = holm_adjust({0.01, 0.04});
  CHECK(a[0] == doctest::Approx(0.02));
  CHECK(a[1] == doctest::Approx(0.04));
  CHECK(holm_adjust({1.0, 1.0, 1.0}) == std::vector<double>{1.0, 1.0, 1.0});
  auto b = holm_adjust({0.02, 0.5, 0.001, 0.02});
  CHECK(b[0] == doctest::Approx(0.06));
  CHECK(b[1] == doctest::Approx(0.5));
  CHECK(b[2] == doctest::Approx(0.004));
  CHECK(b[3] == doctest::Approx(0.06));
  CHECK_THROWS_AS(holm_adjust({1.2}), Error);

  PhiloxStream rng(1, 2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> p(1 + rng.below(12));
    for (auto& v : p) v = rng.uniform();
    auto adj = holm_adjust(p);
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK(adj[i] >= p[i]);
      for (std::size_t j = 0; j < p.size(); ++j)
        if (p[i] < p[j]) CHECK(adj[i] <= adj[j]);
    }
  }
}
