#include "globalqr/cli.hpp"

#include "globalqr/csv.hpp"
#include "globalqr/error.hpp"
#include "globalqr/inference.hpp"
#include "globalqr/simstudy.hpp"
#include "globalqr/svg.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#ifndef GLOBALQR_VERSION
#define GLOBALQR_VERSION "0.0.0"
#endif

namespace gqr {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidData, "cannot open '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write '" + path.string() + "'");
}

void prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorKind::InvalidArgument, "cannot create output directory '" + dir + "'");
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json slice(const Eigen::VectorXd& v, std::size_t start, std::size_t len) {
  return std::vector<double>(v.data() + start, v.data() + start + len);
}

std::vector<double> to_std(const Eigen::VectorXd& v, std::size_t start, std::size_t len) {
  return std::vector<double>(v.data() + start, v.data() + start + len);
}

std::string file_stem(const std::string& label) {
  std::string s;
  for (char c : label) s.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' ? c : '_');
  return s;
}

// Resolved seed: --seed, then GLOBALQR_SEED, then 1.
struct Seed {
  std::uint64_t value = 1;
  std::string source = "default";
};

Seed resolve_seed(const CLI::Option* flag, std::uint64_t given) {
  if (flag->count() > 0) return {given, "flag"};
  if (const char* env = std::getenv("GLOBALQR_SEED"); env && *env) {
    std::string_view text(env);
    std::uint64_t v = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size())
      throw Error(ErrorKind::InvalidArgument, "GLOBALQR_SEED is not an unsigned integer: '" + std::string(text) + "'");
    return {v, "GLOBALQR_SEED"};
  }
  return {};
}

std::size_t default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

json base_manifest(std::string_view command) {
  json m;
  m["tool"] = "globalqr";
  m["version"] = GLOBALQR_VERSION;
  m["command"] = command;
  return m;
}

// manifest.json: the embedded manifest plus run-specific fields.
void write_manifest(const std::string& dir, json manifest, std::size_t workers, const std::string& started,
                    const std::vector<std::string>& outputs) {
  manifest["workers"] = workers;
  manifest["started_at"] = started;
  manifest["finished_at"] = utc_now();
  manifest["outputs"] = outputs;
  write_text(fs::path(dir) / "manifest.json", manifest.dump(2) + "\n");
}

struct TestArgs {
  std::string data, response, taus = "10@0.01:0.99", strategy = "rl", measure = "erl", out;
  std::vector<std::string> interesting, nuisance, categorical;
  std::size_t nperm = 999;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  std::size_t workers = 0;
  bool plot = false;
  CLI::Option* seed_opt = nullptr;
};

int cmd_test(const TestArgs& a, std::ostream& out) {
  const std::string started = utc_now();
  const Seed seed = resolve_seed(a.seed_opt, a.seed);
  TestConfig cfg;
  cfg.grid = QuantileGrid::parse(a.taus);
  cfg.strategy = parse_strategy(a.strategy);
  cfg.s = a.nperm;
  cfg.alpha = a.alpha;
  cfg.measure = parse_measure(a.measure);
  cfg.seed = seed.value;
  cfg.workers = a.workers ? a.workers : default_workers();
  cfg.validate();
  if (a.plot && a.out.empty()) throw Error(ErrorKind::InvalidArgument, "--plot needs --out");

  const std::string bytes = read_bytes(a.data);
  std::istringstream in(bytes);
  const auto dataset = dataset_from_csv(read_csv(in), a.response, a.interesting, a.nuisance, a.categorical);
  const auto result = global_test(dataset, cfg);
  const auto& env = result.envelope;
  const std::size_t p = result.coefficient_labels.size(), d = result.taus.size();

  json manifest = base_manifest("test");
  manifest["config"] = {{"response", a.response},
                        {"interesting", a.interesting},
                        {"nuisance", a.nuisance},
                        {"categorical", a.categorical},
                        {"taus", cfg.grid.taus()},
                        {"strategy", to_string(cfg.strategy)},
                        {"nperm", cfg.s},
                        {"alpha", cfg.alpha},
                        {"measure", to_string(cfg.measure)},
                        {"seed", cfg.seed},
                        {"seed_source", seed.source}};
  manifest["input"] = {{"path", a.data}, {"rows", dataset.n()}, {"fnv1a64", fnv1a_hex(bytes)}};

  json j;
  j["schema_version"] = 1;
  j["kind"] = "global_test";
  j["p_value"] = env.p_value;
  j["alpha"] = env.alpha;
  j["reject"] = env.rejects();
  j["strategy"] = to_string(cfg.strategy);
  j["measure"] = to_string(cfg.measure);
  j["nperm"] = cfg.s;
  j["taus"] = result.taus;
  j["coefficients"] = result.coefficient_labels;
  j["observed"] = vec(result.observed);
  j["lower"] = vec(env.lower);
  j["upper"] = vec(env.upper);
  j["central"] = vec(env.central);
  j["outside"] = env.outside_mask;
  j["kept"] = env.kept;
  json sig = json::array();
  for (const auto& c : result.significant_coordinates)
    sig.push_back({{"coefficient", c.label}, {"tau", c.tau}, {"index", c.index}});
  j["significant"] = sig;
  json curves = json::array();
  for (std::size_t c = 0; c < p; ++c)
    curves.push_back({{"coefficient", result.coefficient_labels[c]},
                      {"observed", slice(result.observed, c * d, d)},
                      {"lower", slice(env.lower, c * d, d)},
                      {"upper", slice(env.upper, c * d, d)}});
  j["curves"] = curves;
  if (result.comparator_p) j["comparators"] = {{"ph", result.comparator_p->ph}, {"nc", result.comparator_p->nc}};
  j["diagnostics"] = result.diagnostics;
  j["manifest"] = manifest;
  const std::string text = j.dump(2) + "\n";

  if (a.out.empty()) {
    out << text;
    return kExitOk;
  }
  prepare_dir(a.out);
  std::vector<std::string> outputs = {"result.json"};
  write_text(fs::path(a.out) / "result.json", text);
  if (a.plot) {
    std::vector<bool> mask(env.outside_mask.begin(), env.outside_mask.end());
    for (std::size_t c = 0; c < p; ++c) {
      EnvelopePanel panel;
      panel.title = result.coefficient_labels[c] + "  (p = " + format_number(env.p_value) + ")";
      panel.x = result.taus;
      panel.observed = to_std(result.observed, c * d, d);
      panel.lower = to_std(env.lower, c * d, d);
      panel.upper = to_std(env.upper, c * d, d);
      panel.central = to_std(env.central, c * d, d);
      panel.outside.assign(mask.begin() + static_cast<std::ptrdiff_t>(c * d),
                           mask.begin() + static_cast<std::ptrdiff_t>((c + 1) * d));
      const std::string name = "coef_" + file_stem(result.coefficient_labels[c]) + ".svg";
      write_text(fs::path(a.out) / name, render_svg(panel));
      outputs.push_back(name);
    }
  }
  write_manifest(a.out, manifest, cfg.workers, started, outputs);
  return kExitOk;
}

struct EnvelopeArgs {
  std::string curves, measure = "erl", out;
  double alpha = 0.05;
  bool plot = false;
};

int cmd_envelope(const EnvelopeArgs& a, std::ostream& out) {
  const std::string started = utc_now();
  if (a.plot && a.out.empty()) throw Error(ErrorKind::InvalidArgument, "--plot needs --out");
  const MeasureId measure = parse_measure(a.measure);
  const std::string bytes = read_bytes(a.curves);
  std::istringstream in(bytes);
  const auto table = read_csv(in);
  const Eigen::MatrixXd curves = matrix_from_csv(table);
  const auto env = build_envelope(curves, measure, a.alpha);

  json manifest = base_manifest("envelope");
  manifest["config"] = {{"alpha", a.alpha}, {"measure", to_string(measure)}};
  manifest["input"] = {{"path", a.curves},
                       {"rows", curves.rows()},
                       {"columns", curves.cols()},
                       {"fnv1a64", fnv1a_hex(bytes)}};

  json j;
  j["schema_version"] = 1;
  j["kind"] = "envelope";
  j["p_value"] = env.p_value;
  j["alpha"] = env.alpha;
  j["reject"] = env.rejects();
  j["measure"] = to_string(measure);
  j["nperm"] = curves.rows() - 1;
  j["columns"] = table.header;
  j["observed"] = vec(curves.row(0).transpose());
  j["lower"] = vec(env.lower);
  j["upper"] = vec(env.upper);
  j["central"] = vec(env.central);
  j["outside"] = env.outside_mask;
  j["kept"] = env.kept;
  j["measures"] = vec(env.measures);
  j["diagnostics"] = env.warnings;
  j["manifest"] = manifest;
  const std::string text = j.dump(2) + "\n";

  if (a.out.empty()) {
    out << text;
    return kExitOk;
  }
  prepare_dir(a.out);
  std::vector<std::string> outputs = {"result.json"};
  write_text(fs::path(a.out) / "result.json", text);
  if (a.plot) {
    EnvelopePanel panel;
    panel.title = "global envelope  (p = " + format_number(env.p_value) + ")";
    panel.x_label = "coordinate";
    for (Eigen::Index k = 0; k < curves.cols(); ++k) panel.x.push_back(static_cast<double>(k + 1));
    panel.observed = to_std(curves.row(0).transpose(), 0, static_cast<std::size_t>(curves.cols()));
    panel.lower = to_std(env.lower, 0, panel.x.size());
    panel.upper = to_std(env.upper, 0, panel.x.size());
    panel.central = to_std(env.central, 0, panel.x.size());
    panel.outside = env.outside_mask;
    write_text(fs::path(a.out) / "envelope.svg", render_svg(panel));
    outputs.push_back("envelope.svg");
  }
  write_manifest(a.out, manifest, 1, started, outputs);
  return kExitOk;
}

struct SimulateArgs {
  std::vector<std::string> experiments, subcases, strategies;
  std::vector<double> c = {0.5};
  std::vector<std::size_t> sizes;
  std::size_t replicates = 100, nperm = 199;
  std::string mode = "null", taus = "10@0.01:0.99", measure = "erl", out;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  std::size_t workers = 0;
  CLI::Option* seed_opt = nullptr;
};

std::vector<ExperimentId> resolve_experiments(const SimulateArgs& a) {
  std::vector<std::string> ids;
  for (const auto& e : a.experiments) {
    if (a.subcases.empty()) {
      ids.push_back(e);
      continue;
    }
    for (const auto& s : a.subcases) {
      const bool dash = e == "V" || e == "v";
      ids.push_back(e + (dash && !s.empty() && s.front() != '-' ? "-" : "") + s);
    }
  }
  std::vector<ExperimentId> out;
  for (const auto& id : ids) {
    auto first = ExperimentId::parse(id, a.c.front());
    if (first.family == Family::VI || first.family == Family::VII || first.family == Family::VIII) {
      for (double c : a.c) out.push_back(ExperimentId::parse(id, c));
    } else {
      out.push_back(first);
    }
  }
  return out;
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  const std::string started = utc_now();
  const Seed seed = resolve_seed(a.seed_opt, a.seed);
  StudyConfig cfg;
  cfg.sizes = a.sizes;
  cfg.replicates = a.replicates;
  cfg.s = a.nperm;
  cfg.grid = QuantileGrid::parse(a.taus);
  cfg.alpha = a.alpha;
  cfg.measure = parse_measure(a.measure);
  cfg.seed = seed.value;
  cfg.workers = a.workers ? a.workers : default_workers();
  if (a.mode == "both")
    cfg.modes = {Mode::Null, Mode::Alternative};
  else
    cfg.modes = {parse_mode(a.mode)};
  for (auto n : a.sizes)
    if (n < 2) throw Error(ErrorKind::InvalidArgument, "sample sizes must be at least 2");

  const auto experiments = resolve_experiments(a);
  const std::vector<std::string> all = {"FL", "FLPLUS", "FLPLUS*", "WN", "RL", "RLS", "RQ", "PH", "NC"};
  std::vector<StudyRow> rows;
  std::vector<std::string> names;
  for (const auto& e : experiments) {
    cfg.experiments = {e};
    cfg.tests.clear();
    for (const auto& name : a.strategies.empty() ? all : a.strategies) {
      auto t = StudyTest::parse(name);
      // the default list only keeps what the experiment supports
      if (a.strategies.empty() && !t.comparator && !applicable(t.strategy, e)) continue;
      cfg.tests.push_back(t);
    }
    for (const auto& t : cfg.tests)
      if (std::find(names.begin(), names.end(), t.name) == names.end()) names.push_back(t.name);
    auto part = run_study(cfg);
    rows.insert(rows.end(), part.begin(), part.end());
  }

  std::ostringstream csv;
  write_study_csv(csv, rows);
  if (a.out.empty()) {
    out << csv.str();
    return kExitOk;
  }
  prepare_dir(a.out);
  write_text(fs::path(a.out) / "study.csv", csv.str());

  json manifest = base_manifest("simulate");
  std::vector<std::string> labels;
  for (const auto& e : experiments) labels.push_back(e.label());
  manifest["config"] = {{"experiments", labels},
                        {"strategies", names},
                        {"N", a.sizes},
                        {"replicates", a.replicates},
                        {"nperm", a.nperm},
                        {"mode", a.mode},
                        {"taus", cfg.grid.taus()},
                        {"alpha", a.alpha},
                        {"measure", to_string(cfg.measure)},
                        {"seed", cfg.seed},
                        {"seed_source", seed.source}};
  manifest["study_fnv1a64"] = fnv1a_hex(csv.str());
  write_manifest(a.out, manifest, cfg.workers, started, {"study.csv"});
  return kExitOk;
}

int exit_code(ErrorKind kind) {
  switch (classify(kind)) {
    case ErrorClass::Usage: return kExitUsage;
    case ErrorClass::Data: return kExitData;
    case ErrorClass::Numerical: return kExitNumerical;
  }
  return kExitNumerical;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Global quantile regression tests with permutation null models and global envelopes", "globalqr"};
  app.set_version_flag("--version", GLOBALQR_VERSION);
  app.require_subcommand(1);

  TestArgs t;
  auto* test = app.add_subcommand("test", "Global test of the interesting covariates on a CSV dataset");
  test->add_option("--data", t.data, "CSV file with a header row")->required();
  test->add_option("--response", t.response, "Response column")->required();
  test->add_option("--interesting", t.interesting, "Interesting covariates (comma list)")->required()->delimiter(',');
  test->add_option("--nuisance", t.nuisance, "Nuisance covariates (comma list)")->delimiter(',');
  test->add_option("--categorical", t.categorical, "Columns to treat as categorical (comma list)")->delimiter(',');
  test->add_option("--taus", t.taus, "Comma list or d@lo:hi")->capture_default_str();
  test->add_option("--strategy", t.strategy, "fl, flplus, wn, rl, rls or rq")->capture_default_str();
  test->add_option("--nperm", t.nperm, "Number of permutations s")->capture_default_str();
  test->add_option("--alpha", t.alpha, "Level")->capture_default_str();
  test->add_option("--measure", t.measure, "erl or area")->capture_default_str();
  t.seed_opt = test->add_option("--seed", t.seed, "Seed (falls back to GLOBALQR_SEED, then 1)");
  test->add_option("--workers", t.workers, "Worker threads (default: available parallelism)");
  test->add_option("--out", t.out, "Output directory (default: print result.json)");
  test->add_flag("--plot", t.plot, "Write one SVG per coefficient");

  SimulateArgs s;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo rejection rates for the simulation experiments");
  sim->add_option("--experiment", s.experiments, "Experiments, e.g. Ia,Ib,VI (comma list)")->required()->delimiter(',');
  sim->add_option("--subcase", s.subcases, "Subcase letters appended to --experiment (comma list)")->delimiter(',');
  sim->add_option("--c", s.c, "Correlation knob for VI-VIII (comma list)")->delimiter(',')->capture_default_str();
  sim->add_option("--N", s.sizes, "Sample sizes (comma list)")->required()->delimiter(',');
  sim->add_option("--replicates", s.replicates, "Simulated datasets per cell")->capture_default_str();
  sim->add_option("--nperm", s.nperm, "Number of permutations s")->capture_default_str();
  sim->add_option("--strategies", s.strategies, "Tests: fl, flplus, wn, rl, rls, rq, ph, nc; '*' suffix for the inner grid")
      ->delimiter(',');
  sim->add_option("--mode", s.mode, "null, power or both")->capture_default_str();
  sim->add_option("--taus", s.taus, "Comma list or d@lo:hi")->capture_default_str();
  sim->add_option("--alpha", s.alpha, "Level")->capture_default_str();
  sim->add_option("--measure", s.measure, "erl or area")->capture_default_str();
  s.seed_opt = sim->add_option("--seed", s.seed, "Seed (falls back to GLOBALQR_SEED, then 1)");
  sim->add_option("--workers", s.workers, "Worker threads (default: available parallelism)");
  sim->add_option("--out", s.out, "Output directory (default: print the CSV)");

  EnvelopeArgs e;
  auto* envc = app.add_subcommand("envelope", "Global envelope test on a matrix of curves (row 1 observed)");
  envc->add_option("--curves", e.curves, "CSV with a header row; rows are T_0..T_s")->required();
  envc->add_option("--alpha", e.alpha, "Level")->capture_default_str();
  envc->add_option("--measure", e.measure, "erl or area")->capture_default_str();
  envc->add_option("--out", e.out, "Output directory (default: print result.json)");
  envc->add_flag("--plot", e.plot, "Write envelope.svg");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& h) {
    return app.exit(h, out, err);
  } catch (const CLI::CallForAllHelp& h) {
    return app.exit(h, out, err);
  } catch (const CLI::CallForVersion& h) {
    return app.exit(h, out, err);
  } catch (const CLI::ParseError& pe) {
    err << "error: " << pe.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*test) return cmd_test(t, out);
    if (*sim) return cmd_simulate(s, out);
    return cmd_envelope(e, out);
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return exit_code(ex.kind());
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace gqr
