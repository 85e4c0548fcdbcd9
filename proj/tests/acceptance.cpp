// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "globalqr/cli.hpp"
#include "globalqr/csv.hpp"
#include "globalqr/envelope.hpp"
#include "globalqr/permutation.hpp"
#include "globalqr/qr_solver.hpp"
#include "globalqr/rng.hpp"
#include "globalqr/simstudy.hpp"
#include "oracles.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include <unistd.h>

using namespace gqr;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::size_t workers() { return std::max(1u, std::thread::hardware_concurrency()); }

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << "  C" << id << "  " << name << "  " << detail << std::endl;
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

struct Instance {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

Instance random_instance(PhiloxStream& rng, Eigen::Index n, Eigen::Index m) {
  std::normal_distribution<double> normal;
  Instance inst{Eigen::MatrixXd(n, m), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    inst.x(i, 0) = 1;
    for (Eigen::Index j = 1; j < m; ++j) inst.x(i, j) = normal(rng);
    inst.y(i) = inst.x(i, m - 1) + 2 * normal(rng);
  }
  return inst;
}

void solver_oracle() {
  PhiloxStream rng(1001, 0);
  const double taus[] = {0.05, 0.3, 0.5, 0.7, 0.95};
  double worst = 0;
  const auto t0 = Clock::now();
  double solver_time = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = static_cast<Eigen::Index>(3 + rng.below(8));
    const auto m = static_cast<Eigen::Index>(1 + rng.below(3));
    const auto inst = random_instance(rng, n, m);
    const double tau = taus[rng.below(5)];
    const auto ts = Clock::now();
    const auto fit = qr_fit(inst.x, inst.y, tau);
    solver_time += seconds_since(ts);
    worst = std::max(worst, std::abs(fit.loss - oracle::enumerate_vertices(inst.x, inst.y, tau).loss));
  }
  const double total = seconds_since(t0);
  report(1, "solver matches vertex enumeration", worst <= 1e-9 && total < 10,
         fmt("max |loss diff| = %.3g, solver %.3f s, with oracle %.3f s", worst, solver_time, total));
}

void solver_equivariance() {
  PhiloxStream rng(1002, 0);
  std::normal_distribution<double> normal;
  double worst = 0;
  auto rel = [](const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
    return (got - want).cwiseAbs().maxCoeff() / std::max(1.0, want.cwiseAbs().maxCoeff());
  };
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = static_cast<Eigen::Index>(1 + rng.below(4));
    const auto n = static_cast<Eigen::Index>(10 + rng.below(60));
    const auto inst = random_instance(rng, n, m);
    const double tau = 0.05 + 0.9 * rng.uniform();
    const auto base = qr_fit(inst.x, inst.y, tau);
    Eigen::VectorXd shift(m);
    for (Eigen::Index j = 0; j < m; ++j) shift(j) = 3 * normal(rng);
    worst = std::max(worst, rel(qr_fit(inst.x, inst.y + inst.x * shift, tau).beta, base.beta + shift));
    const double c = 0.01 + 20 * rng.uniform();
    worst = std::max(worst, rel(qr_fit(inst.x, c * inst.y, tau).beta, c * base.beta));
    worst = std::max(worst, rel(qr_fit(inst.x, -c * inst.y, 1 - tau).beta, -c * base.beta));
  }
  report(2, "regression and scale equivariance", worst <= 1e-8, fmt("max relative deviation = %.3g", worst));
}

void envelope_exactness() {
  const auto t0 = Clock::now();
  const std::size_t repeats = 10000;
  std::size_t reject[2] = {0, 0};
  std::normal_distribution<double> normal;
  for (std::size_t r = 0; r < repeats; ++r) {
    PhiloxStream rng(1003, r);
    Eigen::MatrixXd curves(100, 10);
    for (Eigen::Index i = 0; i < curves.size(); ++i) curves(i) = normal(rng);
    reject[0] += build_envelope(curves, MeasureId::ERL, 0.05).rejects();
    reject[1] += build_envelope(curves, MeasureId::AREA, 0.05).rejects();
  }
  const double erl = static_cast<double>(reject[0]) / repeats, area = static_cast<double>(reject[1]) / repeats;
  const double total = seconds_since(t0);
  const bool ok = std::abs(erl - 0.05) <= 0.0065 && std::abs(area - 0.05) <= 0.0065 && total < 120;
  report(3, "envelope level on iid curves", ok, fmt("ERL %.4f, AREA %.4f, %.1f s", erl, area, total));
}

Eigen::MatrixXd varied_curves(PhiloxStream& rng) {
  std::normal_distribution<double> normal;
  std::student_t_distribution<double> heavy(2.0);
  const auto rows = static_cast<Eigen::Index>(2 + rng.below(200));
  const auto cols = static_cast<Eigen::Index>(1 + rng.below(40));
  const auto kind = rng.below(5);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double level = normal(rng), slope = normal(rng);
    for (Eigen::Index k = 0; k < cols; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(cols);
      double v = 0;
      switch (kind) {
        case 0: v = normal(rng); break;
        case 1: v = level + slope * t + 0.2 * normal(rng); break;
        case 2: v = heavy(rng); break;
        case 3: v = std::round(2 * normal(rng)); break;
        default: v = std::sin(6 * t + level) + 0.1 * normal(rng); break;
      }
      m(i, k) = v;
    }
  }
  const auto twist = rng.below(4);
  if (twist == 0) m.row(0) *= 1.0 + 3.0 * rng.uniform();
  if (twist == 1) m.row(0).array() += 2 * normal(rng);
  if (twist == 2 && rows > 2) m.row(0) = m.row(1);
  return m;
}

void graphical_correspondence() {
  PhiloxStream rng(1004, 0);
  std::size_t agree = 0, total = 0, rejected = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto curves = varied_curves(rng);
    const double alpha = 0.01 + 0.2 * rng.uniform();
    for (auto measure : {MeasureId::ERL, MeasureId::AREA}) {
      const auto env = build_envelope(curves, measure, alpha);
      const bool outside = std::any_of(env.outside_mask.begin(), env.outside_mask.end(), [](bool b) { return b; });
      agree += (env.p_value <= alpha) == outside;
      rejected += outside;
      ++total;
    }
  }
  report(4, "p <= alpha iff observed exits the band", agree == total,
         fmt("%.0f of %.0f agree (%.0f rejections)", static_cast<double>(agree), static_cast<double>(total),
             static_cast<double>(rejected)));
}

StudyConfig study(const std::string& subcase, double c, std::size_t n, Mode mode, std::size_t replicates,
                  const std::vector<std::string>& tests, std::uint64_t seed) {
  StudyConfig cfg;
  cfg.experiments = {ExperimentId::parse(subcase, c)};
  for (const auto& t : tests) cfg.tests.push_back(StudyTest::parse(t));
  cfg.sizes = {n};
  cfg.modes = {mode};
  cfg.replicates = replicates;
  cfg.s = 199;
  cfg.alpha = 0.05;
  cfg.seed = seed;
  cfg.workers = workers();
  return cfg;
}

std::string rates(const std::vector<StudyRow>& rows) {
  std::string out;
  for (const auto& r : rows) out += (out.empty() ? "" : ", ") + r.subcase + " " + r.strategy + " " + fmt("%.3f", r.rate);
  return out;
}

bool within(const std::vector<StudyRow>& rows, double lo, double hi) {
  return std::all_of(rows.begin(), rows.end(), [&](const StudyRow& r) { return r.rate >= lo && r.rate <= hi; });
}

void wn_level() {
  const auto t0 = Clock::now();
  const auto rows = run_study(study("Ic", 0.5, 100, Mode::Null, 500, {"WN"}, 1005));
  report(5, "WN level on Ic null", within(rows, 0.02, 0.09), rates(rows) + fmt(", %.0f s", seconds_since(t0)));
}

std::vector<StudyRow> rl_family_null;

void rl_family_level() {
  const auto t0 = Clock::now();
  for (const char* sub : {"Ia", "Ib"}) {
    const auto rows = run_study(study(sub, 0.5, 100, Mode::Null, 500, {"RL", "RLS", "RQ"}, 1006));
    rl_family_null.insert(rl_family_null.end(), rows.begin(), rows.end());
  }
  report(6, "RL, RLS and RQ level on Ia and Ib null", within(rl_family_null, 0.02, 0.09),
         rates(rl_family_null) + fmt(", %.0f s", seconds_since(t0)));
}

void fl_extreme() {
  const auto t0 = Clock::now();
  auto run = [](double tau) {
    auto cfg = study("Ib", 0.5, 50, Mode::Null, 500, {"FL"}, 1007);
    cfg.grid = QuantileGrid({tau});
    return run_study(cfg).at(0).rate;
  };
  const double low = run(0.01), mid = run(0.5);
  report(7, "FL liberal at tau 0.01, nominal at tau 0.5", low > 0.10 && mid >= 0.02 && mid <= 0.09,
         fmt("level at 0.01 = %.3f, at 0.5 = %.3f, %.0f s", low, mid, seconds_since(t0)));
}

void power_ordering() {
  const auto t0 = Clock::now();
  const auto power = run_study(study("Ib", 0.5, 500, Mode::Alternative, 300, {"RL", "RLS"}, 1008));
  const auto null = run_study(study("Ib", 0.5, 500, Mode::Null, 300, {"RL", "RLS"}, 1008));
  const double rl = power.at(0).rate, rls = power.at(1).rate;
  const bool ok = rls >= rl - 0.05 && rl > null.at(0).rate && rls > null.at(1).rate;
  report(8, "RLS power not below RL power on Ib", ok,
         fmt("power RL %.3f, RLS %.3f; null RL %.3f, RLS %.3f", rl, rls, null.at(0).rate, null.at(1).rate) +
             fmt(", %.0f s", seconds_since(t0)));
}

void flplus_rows() {
  bool ok = true;
  std::string detail;
  for (std::size_t q : {2u, 3u, 4u}) {
    PhiloxStream rng(1009, q);
    std::normal_distribution<double> normal;
    const std::size_t n = 30;
    std::vector<Column> cols = {Column::continuous("x", {})};
    std::vector<std::string> nuisance;
    for (std::size_t j = 1; j < q; ++j) {
      cols.push_back(Column::continuous("w" + std::to_string(j), {}));
      nuisance.push_back(cols.back().name);
    }
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& c : cols) c.numeric.push_back(normal(rng));
      y[i] = cols[1].numeric[i] + normal(rng);
    }
    const Dataset ds("y", y, cols, {"x"}, nuisance);
    const auto design = build_design(ds);
    const auto grid = QuantileGrid::equally_spaced(10, 0.01, 0.99);
    const auto model = prepare_null_model(ds, design, grid, StrategyId::FLPLUS, 5);
    std::size_t bad = 0;
    for (std::uint64_t r = 1; r <= 50; ++r) {
      const auto rep = draw_replicate(model, r);
      for (std::size_t k = 0; k < grid.size(); ++k)
        bad += rep.response(k).size() != static_cast<Eigen::Index>(n - q + 1);
    }
    ok = ok && bad == 0 && design.q() == q;
    detail += (detail.empty() ? "" : ", ") + fmt("q=%.0f: %.0f bad", static_cast<double>(q), static_cast<double>(bad));
  }
  report(9, "FLPLUS keeps n-q+1 rows", ok, detail);
}

void vi_correlation() {
  bool ok = true;
  std::string detail;
  for (double c : {0.0, 0.3, 0.5, 0.7}) {
    PhiloxStream rng(1010, static_cast<std::uint64_t>(c * 10));
    const auto ds = generate(ExperimentId::parse("VI", c), 100000, Mode::Null, rng);
    const auto& x = ds.column("x").numeric;
    const auto& z = ds.column("z").numeric;
    const double n = static_cast<double>(x.size());
    double mx = 0, mz = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      mx += x[i] / n;
      mz += z[i] / n;
    }
    double sxz = 0, sxx = 0, szz = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      sxz += (x[i] - mx) * (z[i] - mz);
      sxx += (x[i] - mx) * (x[i] - mx);
      szz += (z[i] - mz) * (z[i] - mz);
    }
    const double r = sxz / std::sqrt(sxx * szz), want = c * c / (1 + 2 * c * c - 2 * c);
    ok = ok && std::abs(r - want) <= 0.01;
    detail += (detail.empty() ? "" : ", ") + fmt("c=%.1f: %.4f vs %.4f", c, r, want);
  }
  report(10, "VI correlation of X and Z", ok, detail);
}

void vi_conservative() {
  const auto t0 = Clock::now();
  const auto rows = run_study(study("VI", 0.7, 200, Mode::Null, 300, {"RLS", "RQ"}, 1011));
  report(11, "RLS and RQ level on VI null with c=0.7", within(rows, 0.0, 0.08),
         rates(rows) + fmt(", %.0f s", seconds_since(t0)));
}

int cli(std::vector<std::string> args, std::string& out) {
  args.insert(args.begin(), "globalqr");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), o, e);
  out = o.str() + e.str();
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void cli_roundtrip() {
  const fs::path dir = fs::temp_directory_path() / ("globalqr_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  bool ok = true;
  std::string detail;
  try {
    PhiloxStream rng(1012, 0);
    std::normal_distribution<double> normal;
    const auto ds = generate(ExperimentId::parse("Ib"), 80, Mode::Alternative, rng);
    {
      std::ofstream f(dir / "data.csv");
      write_csv(f, dataset_to_csv(ds));
    }
    std::string out;
    std::vector<std::string> args = {"test", "--data", (dir / "data.csv").string(), "--response", "y",
                                     "--interesting", "x", "--nuisance", "z", "--strategy", "rls", "--nperm", "199",
                                     "--seed", "5", "--out"};
    auto a = args, b = args;
    a.push_back((dir / "a").string());
    b.push_back((dir / "b").string());
    b.insert(b.end(), {"--workers", "3"});
    ok = cli(a, out) == 0 && cli(b, out) == 0;
    const bool identical = ok && slurp(dir / "a/result.json") == slurp(dir / "b/result.json");
    ok = ok && identical;
    detail += identical ? "result.json byte-identical" : "result.json differs";

    Eigen::MatrixXd curves(200, 12);
    for (Eigen::Index i = 0; i < curves.size(); ++i) curves(i) = normal(rng);
    curves.row(0) *= 1.4;
    std::vector<std::string> header;
    for (int k = 0; k < 12; ++k) header.push_back("c" + std::to_string(k));
    {
      std::ofstream f(dir / "curves.csv");
      write_csv(f, matrix_to_csv(curves, header));
    }
    bool same = true;
    for (auto measure : {MeasureId::ERL, MeasureId::AREA}) {
      if (cli({"envelope", "--curves", (dir / "curves.csv").string(), "--measure", std::string(to_string(measure))},
              out) != 0) {
        same = false;
        break;
      }
      const auto j = nlohmann::json::parse(out);
      const auto env = build_envelope(curves, measure, 0.05);
      same = same && j["p_value"].get<double>() == env.p_value && j["kept"].get<std::size_t>() == env.kept;
      for (Eigen::Index k = 0; k < 12; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        same = same && j["lower"][kk].get<double>() == env.lower(k) && j["upper"][kk].get<double>() == env.upper(k);
      }
    }
    ok = ok && same;
    detail += same ? ", envelope equals library" : ", envelope differs from library";
  } catch (const std::exception& e) {
    ok = false;
    detail += std::string(" exception: ") + e.what();
  }
  std::error_code ec;
  fs::remove_all(dir, ec);
  report(12, "CLI determinism and envelope round trip", ok, detail);
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> criteria = {
      solver_oracle,   solver_equivariance, envelope_exactness, graphical_correspondence,
      wn_level,        rl_family_level,     fl_extreme,         power_ordering,
      flplus_rows,     vi_correlation,      vi_conservative,    cli_roundtrip};
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    try {
      criteria[i]();
    } catch (const std::exception& e) {
      report(static_cast<int>(i + 1), "threw", false, e.what());
    }
  }
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : std::string("all criteria passed"))
            << std::endl;
  return failures ? 1 : 0;
}
