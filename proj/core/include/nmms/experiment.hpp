#pragma once

// Experiment runner behind the command-line tool: presets, flat key=value
// configuration, builtin targets and per-solver output files.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nmms/hilbert.hpp"
#include "nmms/io.hpp"
#include "nmms/mms.hpp"

namespace nmms {

/// Builtin target ids: zero, square (sum of x_k^2), track1d
/// (x^2 + 0.3 sin 2 pi x + 0.2 cos 3 pi x, first coordinate), cos_sum
/// (sum of cos pi x_k), linear (sum of x_k).
using PointFunction = std::function<double(const Eigen::Ref<const Eigen::RowVectorXd>&)>;
PointFunction BuiltinTarget(const std::string& id);
GridFunction SampleBuiltin(const std::string& id, const GridPtr& grid);

struct ExperimentConfig {
  std::string preset = "custom";  // track1d | regress10d | csv_regression | custom

  // grid
  double range_lo = -1.0;
  double range_hi = 1.0;
  int count = 256;
  int dimension = 1;
  std::string sampling = "uniform-grid";  // uniform-grid | iid-uniform

  // target: exactly one of target_id / target_csv
  std::string target_id;
  std::string target_csv;
  std::vector<std::string> feature_columns;
  std::string target_column;
  bool standardize = true;

  // initial condition; empty means the freshly initialized network output
  std::string initial_id;
  int pretrain_iters = 2000;
  double pretrain_lr = 1e-3;
  std::string pretrain_optimizer = "adam";

  // network
  std::vector<int> hidden_widths = {32};
  std::string init = "xavier_normal_zero_bias";

  // scheme and inner solvers
  double tau = 0.1;
  int outer_steps = 30;
  int gn_inner_steps = 5;
  double lm_damping = 0.0;
  int cg_max_iters = 30;
  double cg_tolerance = 1e-8;
  double ls_shrink = 0.5;
  int ls_max_backtracks = 8;
  double ls_max_step_norm = 5.0;
  double adam_lr = 1e-3;
  int adam_iters = 500;
  double gd_lr = 1e-3;
  int gd_iters = 500;

  // theory
  bool theory = true;
  double epsilon = 0.0;
  double delta = 1e-2;
  int lipschitz_pairs = 64;
  double lipschitz_radius = 1e-2;

  std::vector<std::string> solvers = {"gn"};  // gn | adam | gd | exact
  std::string output_dir = "nmms_out";
  std::optional<std::uint64_t> seed;
  bool parallel = false;
  int test_points = 1000;

  /// Sets one key from its textual value; throws ParameterError for unknown keys.
  void Set(const std::string& key, const std::string& value);
  /// Defaults for a named preset; leaves the seed and output directory alone.
  void ApplyPreset(const std::string& name);
  void Validate() const;
  /// Resolved configuration as key = value lines in a fixed order.
  std::string ToText() const;

  MmsConfig ToMmsConfig(SolverKind solver) const;
  MlpArchitecture Architecture() const;
};

/// Every key accepted by ExperimentConfig::Set, in ToText order.
std::vector<std::string> ExperimentConfigKeys();

/// Parses "key = value" lines; '#' starts a comment.
std::map<std::string, std::string> ParseKeyValueFile(const std::string& path);

/// Precedence: overrides > file > preset defaults > built-in defaults. The
/// preset is taken from the overrides, then the file.
ExperimentConfig ResolveConfig(const std::optional<std::string>& file,
                               const std::map<std::string, std::string>& overrides);

struct SolverSummary {
  std::string solver;
  double final_energy = 0.0;
  double final_tracking_error = 0.0;
  double rel_l2 = 0.0;  // on the test set; NaN for CSV targets
  double wall_time = 0.0;
  bool certificate_pass = false;
  bool failed = false;
  std::string failure;
};

struct ExperimentResult {
  std::vector<SolverSummary> solvers;
  bool all_certificates_pass() const;
  bool any_failure() const;
};

/// Runs every solver of the sweep and writes, under output_dir: config.txt,
/// grid.csv (target on the grid), reference_trajectory.csv,
/// reference_iterates.csv, summary.csv and, per solver, a subdirectory with
/// trajectory.csv, iterates.csv, certificate.csv, certificate.txt and
/// params.csv.
ExperimentResult RunExperiment(const ExperimentConfig& cfg);

/// Grid and target described by the configuration.
struct ProblemData {
  GridPtr grid;
  GridFunction target;
  std::optional<Standardization> transform;
};
ProblemData BuildProblem(const ExperimentConfig& cfg);

}  // namespace nmms
