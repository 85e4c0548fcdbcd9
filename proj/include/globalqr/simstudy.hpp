#pragma once

// Simulation experiments I-VIII and a Monte Carlo runner estimating the
// rejection rate of each test per (experiment, N, mode).

#include "globalqr/core.hpp"
#include "globalqr/envelope.hpp"
#include "globalqr/permutation.hpp"
#include "globalqr/rng.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace gqr {

enum class Family { I, II, III, IV, V, VI, VII, VIII };

std::string_view to_string(Family f);

struct ExperimentId {
  Family family = Family::I;
  std::string subcase = "Ia";  // "Ia".."Id", "IIa", "V-cat", "VI", ...
  double a = 0;                // scale multiplier of Z
  double b = 0;                // location multiplier of Z
  double c = 0;                // correlation knob (VI-VIII)
  double sigma_eps = 0.2;      // sd of the noise branch (II, IV, VIII)
  bool z_categorical = false;
  bool x_categorical = true;

  /// "Ia", "IIb", "V-cont", "VI", "VIIb", "VIII" ...; c applies to VI-VIII.
  static ExperimentId parse(std::string_view subcase, double c = 0.5);
  /// Subcase with c appended for the correlated families, e.g. "VI[c=0.7]".
  std::string label() const;
  void validate() const;
};

/// Every subcase known to parse().
std::vector<std::string> known_subcases();

enum class Mode { Null, Alternative };

std::string_view to_string(Mode m);
/// "null" or "power" (also "alternative").
Mode parse_mode(std::string_view text);

/// One simulated dataset with columns y, x, z (and z1 for II, IV, VIII).
/// Draws in which a categorical column shows a single level are redrawn.
Dataset generate(const ExperimentId& experiment, std::size_t n, Mode mode, PhiloxStream& rng);

/// Whether a strategy can run on the experiment (WN needs categorical nuisance only).
bool applicable(StrategyId strategy, const ExperimentId& experiment);

/// A test of the study: a permutation strategy, or PH / NC computed from the FL
/// replicates. A trailing '*' restricts the grid to 10 taus on [0.1, 0.9].
struct StudyTest {
  std::string name;  // as given, upper-cased
  StrategyId strategy = StrategyId::FL;
  bool comparator = false;
  bool ph = false;
  bool starred = false;

  static StudyTest parse(std::string_view text);
};

struct StudyConfig {
  std::vector<ExperimentId> experiments;
  std::vector<StudyTest> tests;
  std::vector<std::size_t> sizes;
  std::vector<Mode> modes = {Mode::Null};
  std::size_t replicates = 100;
  std::size_t s = 199;
  QuantileGrid grid = QuantileGrid::equally_spaced(10, 0.01, 0.99);
  double alpha = 0.05;
  MeasureId measure = MeasureId::ERL;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
};

struct StudyRow {
  std::string experiment;
  std::string subcase;
  std::string strategy;
  std::size_t n = 0;
  Mode mode = Mode::Null;
  std::size_t replicates = 0;
  std::size_t s = 0;
  double alpha = 0;
  std::size_t rejections = 0;
  double rate = 0;
  double mc_se = 0;
};

/// Rows ordered by experiment, N, mode, then test, following the config order.
std::vector<StudyRow> run_study(const StudyConfig& config);

void write_study_csv(std::ostream& out, const std::vector<StudyRow>& rows);

}  // namespace gqr
