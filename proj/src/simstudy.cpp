#include "globalqr/simstudy.hpp"

#include "globalqr/csv.hpp"
#include "globalqr/error.hpp"
#include "globalqr/inference.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

namespace gqr {

std::string_view to_string(Family f) {
  static constexpr std::string_view names[] = {"I", "II", "III", "IV", "V", "VI", "VII", "VIII"};
  return names[static_cast<int>(f)];
}

std::string_view to_string(Mode m) { return m == Mode::Null ? "null" : "power"; }

Mode parse_mode(std::string_view text) {
  std::string low;
  for (char c : text) low.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (low == "null") return Mode::Null;
  if (low == "power" || low == "alternative") return Mode::Alternative;
  throw Error(ErrorKind::InvalidArgument, "unknown mode '" + std::string(text) + "' (null or power)");
}

namespace {

struct SubcaseSpec {
  const char* name;
  Family family;
  double a, b;
  bool z_categorical;
  bool x_categorical;
};

// Ia-Id: continuous Z ~ U(0,1.5) or Bernoulli Z; IIa/IIb: Z ~ U(0,1) or Bernoulli.
constexpr SubcaseSpec kSubcases[] = {
    {"Ia", Family::I, 0, 1, false, true},        {"Ib", Family::I, 1, 1, false, true},
    {"Ic", Family::I, 0, 0.1, true, true},       {"Id", Family::I, 0.1, 0.1, true, true},
    {"IIa", Family::II, 0, 0, false, true},      {"IIb", Family::II, 0, 0, true, true},
    {"IIIa", Family::III, 0, 1, false, true},    {"IIIb", Family::III, 1, 1, false, true},
    {"IIIc", Family::III, 0, 0.1, true, true},   {"IIId", Family::III, 0.1, 0.1, true, true},
    {"IVa", Family::IV, 0, 0, false, true},      {"IVb", Family::IV, 0, 0, true, true},
    {"V-cat", Family::V, 0, 0, false, true},     {"V-cont", Family::V, 0, 0, false, false},
    {"VI", Family::VI, 0, 0, false, false},      {"VIIa", Family::VII, 0, 1, false, true},
    {"VIIb", Family::VII, 1, 1, false, true},    {"VIII", Family::VIII, 0, 0, false, true},
};

bool correlated(Family f) { return f == Family::VI || f == Family::VII || f == Family::VIII; }

}  // namespace

std::vector<std::string> known_subcases() {
  std::vector<std::string> out;
  for (const auto& s : kSubcases) out.emplace_back(s.name);
  return out;
}

ExperimentId ExperimentId::parse(std::string_view subcase, double c) {
  std::string key(subcase);
  for (const auto& s : kSubcases) {
    std::string name = s.name;
    bool match = key.size() == name.size();
    for (std::size_t i = 0; match && i < key.size(); ++i)
      match = std::tolower(static_cast<unsigned char>(key[i])) == std::tolower(static_cast<unsigned char>(name[i]));
    if (!match) continue;
    ExperimentId e;
    e.family = s.family;
    e.subcase = s.name;
    e.a = s.a;
    e.b = s.b;
    e.z_categorical = s.z_categorical;
    e.x_categorical = s.x_categorical;
    if (correlated(s.family)) e.c = c;
    e.validate();
    return e;
  }
  throw Error(ErrorKind::InvalidParameters, "unknown experiment '" + key + "'");
}

std::string ExperimentId::label() const {
  if (!correlated(family)) return subcase;
  return subcase + "[c=" + format_number(c) + "]";
}

void ExperimentId::validate() const {
  const auto known = known_subcases();
  auto it = std::find(known.begin(), known.end(), subcase);
  if (it == known.end()) throw Error(ErrorKind::InvalidParameters, "unknown subcase '" + subcase + "'");
  if (kSubcases[it - known.begin()].family != family)
    throw Error(ErrorKind::InvalidParameters, "subcase " + subcase + " does not belong to family " + std::string(to_string(family)));
  if (!(c >= 0 && c <= 1)) throw Error(ErrorKind::InvalidParameters, "c must lie in [0,1]");
  if (!(sigma_eps > 0) || !std::isfinite(a) || !std::isfinite(b))
    throw Error(ErrorKind::InvalidParameters, "invalid experiment parameters");
}

namespace {

double uniform(PhiloxStream& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }
double bernoulli(PhiloxStream& rng) { return rng.below(2) ? 1.0 : 0.0; }

struct Draw {
  std::vector<double> y, x, z, z1;
};

Draw draw_once(const ExperimentId& e, std::size_t n, Mode mode, PhiloxStream& rng) {
  std::normal_distribution<double> normal;
  std::normal_distribution<double> noise(1.0, e.sigma_eps);
  std::student_t_distribution<double> t4(4.0);
  std::poisson_distribution<int> poisson(3.0);
  const bool alt = mode == Mode::Alternative;
  const bool has_z1 = e.family == Family::II || e.family == Family::IV || e.family == Family::VIII;

  Draw d;
  d.y.resize(n);
  d.x.resize(n);
  d.z.resize(n);
  if (has_z1) d.z1.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    double x = 0, z = 0, yprime = 0;
    switch (e.family) {
      case Family::I:
      case Family::II:
        x = bernoulli(rng);
        yprime = alt && x == 1 ? t4(rng) : normal(rng);
        if (e.family == Family::I)
          z = e.z_categorical ? bernoulli(rng) : uniform(rng, 0, 1.5);
        else
          z = e.z_categorical ? bernoulli(rng) : uniform(rng, 0, 1);
        break;
      case Family::III:
      case Family::IV: {
        x = std::max(poisson(rng), 1);
        if (alt) {
          std::student_t_distribution<double> tx(x);
          yprime = tx(rng);
        } else {
          yprime = t4(rng);
        }
        if (e.family == Family::III)
          z = e.z_categorical ? bernoulli(rng) : uniform(rng, 0, 1.5);
        else
          z = e.z_categorical ? bernoulli(rng) : uniform(rng, 0, 1);
        break;
      }
      case Family::V: {
        x = e.x_categorical ? (rng.below(2) ? 5.0 : 4.7) : uniform(rng, 4, 5);
        z = uniform(rng, 0.5, 2);
        std::gamma_distribution<double> gamma(alt ? x : 4.5, z);
        d.y[i] = gamma(rng);
        break;
      }
      case Family::VI: {
        const double a = rng.uniform(), b = rng.uniform(), c = rng.uniform();
        x = (1 - e.c) * a + e.c * c;
        z = (1 - e.c) * b + e.c * c;
        std::gamma_distribution<double> gamma(alt ? 4 + x : 4.5, 1 + z);
        d.y[i] = gamma(rng);
        break;
      }
      case Family::VII:
      case Family::VIII: {
        const double a = rng.uniform(), b = rng.uniform(), c = rng.uniform();
        x = std::round((1 - e.c) * a + e.c * c);
        z = 1.5 * ((1 - e.c) * b + e.c * c);
        yprime = alt && x == 1 ? t4(rng) : normal(rng);
        break;
      }
    }
    switch (e.family) {
      case Family::I:
      case Family::III:
      case Family::VII:
        d.y[i] = (1 + e.a * z) * yprime + e.b * z;
        break;
      case Family::II:
      case Family::IV:
      case Family::VIII: {
        const double z1 = uniform(rng, 0, 1.5);
        const double eps = noise(rng);
        d.z1[i] = z1;
        d.y[i] = z < z1 ? eps : yprime;
        break;
      }
      default:
        break;
    }
    d.x[i] = x;
    d.z[i] = z;
  }
  return d;
}

std::size_t distinct(const std::vector<double>& v) {
  auto s = v;
  std::sort(s.begin(), s.end());
  return static_cast<std::size_t>(std::unique(s.begin(), s.end()) - s.begin());
}

}  // namespace

Dataset generate(const ExperimentId& experiment, std::size_t n, Mode mode, PhiloxStream& rng) {
  experiment.validate();
  if (n < 2) throw Error(ErrorKind::InvalidParameters, "sample size must be at least 2");
  for (int attempt = 0; attempt < 1000; ++attempt) {
    auto d = draw_once(experiment, n, mode, rng);
    if (experiment.x_categorical && distinct(d.x) < 2) continue;
    if (experiment.z_categorical && distinct(d.z) < 2) continue;
    std::vector<Column> cols;
    cols.push_back(experiment.x_categorical ? Column::categorical_from_numbers("x", d.x) : Column::continuous("x", d.x));
    cols.push_back(experiment.z_categorical ? Column::categorical_from_numbers("z", d.z) : Column::continuous("z", d.z));
    std::vector<std::string> nuisance = {"z"};
    if (!d.z1.empty()) {
      cols.push_back(Column::continuous("z1", d.z1));
      nuisance.push_back("z1");
    }
    return Dataset("y", std::move(d.y), std::move(cols), {"x"}, nuisance);
  }
  throw Error(ErrorKind::InvalidParameters, "could not draw a sample with two levels of every categorical column");
}

bool applicable(StrategyId strategy, const ExperimentId& experiment) {
  if (strategy != StrategyId::WN) return true;
  const bool has_z1 = experiment.family == Family::II || experiment.family == Family::IV || experiment.family == Family::VIII;
  return experiment.z_categorical && !has_z1;
}

StudyTest StudyTest::parse(std::string_view text) {
  StudyTest t;
  for (char c : text) t.name.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  std::string base = t.name;
  if (!base.empty() && base.back() == '*') {
    t.starred = true;
    base.pop_back();
  }
  if (base == "FL+") t.name = t.starred ? "FLPLUS*" : "FLPLUS";
  if (base == "PH" || base == "NC") {
    t.comparator = true;
    t.ph = base == "PH";
    t.strategy = StrategyId::FL;
  } else {
    t.strategy = parse_strategy(base);
  }
  return t;
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// A global test to run once per replicate; several study tests may read it.
struct BaseRun {
  StrategyId strategy;
  bool starred;
};

}  // namespace

std::vector<StudyRow> run_study(const StudyConfig& config) {
  if (!(config.alpha > 0 && config.alpha < 1)) throw Error(ErrorKind::InvalidArgument, "alpha must lie in (0,1)");
  if (config.s < 1) throw Error(ErrorKind::InvalidArgument, "number of permutations must be at least 1");
  std::vector<StudyRow> rows;
  if (config.replicates == 0) return rows;

  std::vector<BaseRun> bases;
  std::vector<std::size_t> base_of(config.tests.size());
  for (std::size_t t = 0; t < config.tests.size(); ++t) {
    const auto& test = config.tests[t];
    auto it = std::find_if(bases.begin(), bases.end(), [&](const BaseRun& b) {
      return b.strategy == test.strategy && b.starred == test.starred;
    });
    if (it == bases.end()) it = bases.insert(bases.end(), {test.strategy, test.starred});
    base_of[t] = static_cast<std::size_t>(it - bases.begin());
  }
  const auto starred_grid = QuantileGrid::equally_spaced(10, 0.1, 0.9);

  for (const auto& experiment : config.experiments) {
    for (const auto& test : config.tests)
      if (!test.comparator && !applicable(test.strategy, experiment))
        throw Error(ErrorKind::WnNeedsCategorical,
                    "experiment " + experiment.label() + ": WN requires categorical nuisance");
    for (std::size_t n : config.sizes) {
      for (Mode mode : config.modes) {
        std::ostringstream cell;
        cell << experiment.label() << '|' << n << '|' << to_string(mode);
        const std::uint64_t cell_key = combine_seed(config.seed, fnv1a(cell.str()));

        const std::size_t reps = config.replicates, tests = config.tests.size();
        std::vector<char> rejected(reps * tests, 0);
        const std::size_t workers = std::max<std::size_t>(1, std::min(config.workers, reps));
        struct Failure {
          std::size_t replicate = std::numeric_limits<std::size_t>::max();
          ErrorKind kind = ErrorKind::DidNotConverge;
          std::string message;
        };
        std::vector<Failure> failures(workers);

        auto run = [&](std::size_t w) {
          for (std::size_t r = w; r < reps; r += workers) {
            try {
              PhiloxStream data_rng(cell_key, 2 * r);
              const auto ds = generate(experiment, n, mode, data_rng);
              std::vector<TestOutcome> outcomes;
              for (const auto& base : bases) {
                TestConfig tc;
                tc.grid = base.starred ? starred_grid : config.grid;
                tc.strategy = base.strategy;
                tc.s = config.s;
                tc.alpha = config.alpha;
                tc.measure = config.measure;
                tc.seed = combine_seed(cell_key, 2 * r + 1);
                tc.workers = 1;
                outcomes.push_back(global_test(ds, tc));
              }
              for (std::size_t t = 0; t < tests; ++t) {
                const auto& test = config.tests[t];
                const auto& out = outcomes[base_of[t]];
                bool reject = out.envelope.rejects();
                if (test.comparator) {
                  const double p = test.ph ? out.comparator_p->ph : out.comparator_p->nc;
                  reject = p <= config.alpha * (1 + 1e-12);
                }
                rejected[r * tests + t] = reject;
              }
            } catch (const Error& e) {
              failures[w] = {r, e.kind(), e.what()};
              return;
            }
          }
        };
        if (workers == 1) {
          run(0);
        } else {
          std::vector<std::thread> pool;
          for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
          for (auto& th : pool) th.join();
        }
        const auto first = std::min_element(failures.begin(), failures.end(), [](const Failure& a, const Failure& b) {
          return a.replicate < b.replicate;
        });
        if (first->replicate != std::numeric_limits<std::size_t>::max())
          throw Error(first->kind, "experiment " + experiment.label() + ", N=" + std::to_string(n) + ", mode " +
                                       std::string(to_string(mode)) + ", sample " + std::to_string(first->replicate) +
                                       ": " + first->message);

        for (std::size_t t = 0; t < tests; ++t) {
          StudyRow row;
          row.experiment = std::string(to_string(experiment.family));
          row.subcase = experiment.label();
          row.strategy = config.tests[t].name;
          row.n = n;
          row.mode = mode;
          row.replicates = reps;
          row.s = config.s;
          row.alpha = config.alpha;
          for (std::size_t r = 0; r < reps; ++r) row.rejections += static_cast<std::size_t>(rejected[r * tests + t]);
          row.rate = static_cast<double>(row.rejections) / static_cast<double>(reps);
          row.mc_se = std::sqrt(row.rate * (1 - row.rate) / static_cast<double>(reps));
          rows.push_back(std::move(row));
        }
      }
    }
  }
  return rows;
}

void write_study_csv(std::ostream& out, const std::vector<StudyRow>& rows) {
  CsvTable t;
  t.header = {"experiment", "subcase", "strategy", "N", "mode", "replicates", "s", "alpha", "rejections", "rate", "mc_se"};
  for (const auto& r : rows)
    t.rows.push_back({r.experiment, r.subcase, r.strategy, std::to_string(r.n), std::string(to_string(r.mode)),
                      std::to_string(r.replicates), std::to_string(r.s), format_number(r.alpha),
                      std::to_string(r.rejections), format_number(r.rate), format_number(r.mc_se)});
  write_csv(out, t);
}

}  // namespace gqr
