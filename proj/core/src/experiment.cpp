#include "nmms/experiment.hpp"

#include <fmt/format.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <numbers>
#include <random>
#include <sstream>

#include "nmms/error.hpp"
#include "nmms/io.hpp"
#include "nmms/reference.hpp"
#include "nmms/theory.hpp"

namespace nmms {
namespace {

namespace fs = std::filesystem;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string Trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> SplitList(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = Trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
std::string JoinList(const std::vector<T>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_same_v<T, std::string>) {
      out += items[i];
    } else {
      out += std::to_string(items[i]);
    }
  }
  return out;
}

double ToDouble(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ParameterError("config key '" + key + "' expects a number, got '" + v + "'");
}

int ToInt(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const int x = std::stoi(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ParameterError("config key '" + key + "' expects an integer, got '" + v + "'");
}

bool ToBool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ParameterError("config key '" + key + "' expects a boolean, got '" + v + "'");
}

struct KeySpec {
  const char* key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

#define NMMS_NUM(name)                                                      \
  KeySpec {                                                                 \
    #name, [](const ExperimentConfig& c) { return FormatNumber(c.name); }, \
        [](ExperimentConfig& c, const std::string& v) { c.name = ToDouble(#name, v); } \
  }
#define NMMS_INT(name)                                                        \
  KeySpec {                                                                   \
    #name, [](const ExperimentConfig& c) { return std::to_string(c.name); }, \
        [](ExperimentConfig& c, const std::string& v) { c.name = ToInt(#name, v); } \
  }
#define NMMS_STR(name)                                         \
  KeySpec {                                                    \
    #name, [](const ExperimentConfig& c) { return c.name; },   \
        [](ExperimentConfig& c, const std::string& v) { c.name = v; } \
  }
#define NMMS_BOOL(name)                                                          \
  KeySpec {                                                                      \
    #name, [](const ExperimentConfig& c) { return std::string(c.name ? "true" : "false"); }, \
        [](ExperimentConfig& c, const std::string& v) { c.name = ToBool(#name, v); } \
  }

const std::vector<KeySpec>& Keys() {
  static const std::vector<KeySpec> keys = {
      NMMS_STR(preset),
      NMMS_NUM(range_lo),
      NMMS_NUM(range_hi),
      NMMS_INT(count),
      NMMS_INT(dimension),
      NMMS_STR(sampling),
      NMMS_STR(target_id),
      NMMS_STR(target_csv),
      KeySpec{"feature_columns",
              [](const ExperimentConfig& c) { return JoinList(c.feature_columns); },
              [](ExperimentConfig& c, const std::string& v) { c.feature_columns = SplitList(v); }},
      NMMS_STR(target_column),
      NMMS_BOOL(standardize),
      NMMS_STR(initial_id),
      NMMS_INT(pretrain_iters),
      NMMS_NUM(pretrain_lr),
      NMMS_STR(pretrain_optimizer),
      KeySpec{"hidden_widths",
              [](const ExperimentConfig& c) { return JoinList(c.hidden_widths); },
              [](ExperimentConfig& c, const std::string& v) {
                c.hidden_widths.clear();
                for (const auto& w : SplitList(v)) c.hidden_widths.push_back(ToInt("hidden_widths", w));
              }},
      NMMS_STR(init),
      NMMS_NUM(tau),
      NMMS_INT(outer_steps),
      NMMS_INT(gn_inner_steps),
      NMMS_NUM(lm_damping),
      NMMS_INT(cg_max_iters),
      NMMS_NUM(cg_tolerance),
      NMMS_NUM(ls_shrink),
      NMMS_INT(ls_max_backtracks),
      NMMS_NUM(ls_max_step_norm),
      NMMS_NUM(adam_lr),
      NMMS_INT(adam_iters),
      NMMS_NUM(gd_lr),
      NMMS_INT(gd_iters),
      NMMS_BOOL(theory),
      NMMS_NUM(epsilon),
      NMMS_NUM(delta),
      NMMS_INT(lipschitz_pairs),
      NMMS_NUM(lipschitz_radius),
      KeySpec{"solvers", [](const ExperimentConfig& c) { return JoinList(c.solvers); },
              [](ExperimentConfig& c, const std::string& v) { c.solvers = SplitList(v); }},
      NMMS_STR(output_dir),
      KeySpec{"seed",
              [](const ExperimentConfig& c) {
                return c.seed ? std::to_string(*c.seed) : std::string("none");
              },
              [](ExperimentConfig& c, const std::string& v) {
                try {
                  std::size_t used = 0;
                  const auto s = std::stoull(v, &used);
                  if (used == v.size() && v[0] != '-') {
                    c.seed = s;
                    return;
                  }
                } catch (const std::exception&) {
                }
                throw ParameterError("seed must be a nonnegative integer, got '" + v + "'");
              }},
      NMMS_BOOL(parallel),
      NMMS_INT(test_points),
  };
  return keys;
}

#undef NMMS_NUM
#undef NMMS_INT
#undef NMMS_STR
#undef NMMS_BOOL

GridPtr BuildGrid(const ExperimentConfig& cfg, int count, std::uint64_t seed) {
  if (cfg.sampling == "uniform-grid") {
    if (cfg.dimension == 1) return SampleGrid::Linspace(cfg.range_lo, cfg.range_hi, count);
    const int per_axis = static_cast<int>(std::lround(std::pow(count, 1.0 / cfg.dimension)));
    if (std::pow(per_axis, cfg.dimension) != count) {
      throw ParameterError(fmt::format(
          "uniform-grid in {} dimensions needs count = m^{}, got {}", cfg.dimension,
          cfg.dimension, count));
    }
    Matrix points(count, cfg.dimension);
    for (int i = 0; i < count; ++i) {
      int rest = i;
      for (int k = 0; k < cfg.dimension; ++k) {
        const int j = rest % per_axis;
        rest /= per_axis;
        points(i, k) = per_axis == 1 ? cfg.range_lo
                                     : cfg.range_lo + (cfg.range_hi - cfg.range_lo) * j /
                                                          (per_axis - 1);
      }
    }
    return SampleGrid::Uniform(std::move(points));
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(cfg.range_lo, cfg.range_hi);
  Matrix points(count, cfg.dimension);
  for (int i = 0; i < count; ++i) {
    for (int k = 0; k < cfg.dimension; ++k) points(i, k) = dist(rng);
  }
  return SampleGrid::Uniform(std::move(points));
}

void EnsureDirectory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create directory '" + dir.string() + "': " + ec.message());
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
  out << text;
}

struct Shared {
  const ExperimentConfig* cfg;
  GridPtr grid;
  const QuadraticRegressionEnergy* energy;
  MlpModel initial;
  const ExactTrajectory* reference;
  std::optional<GridPtr> test_grid;
};

double RelativeL2(const Shared& s, const MlpModel& model) {
  if (!s.test_grid) return kNaN;
  const GridFunction truth = SampleBuiltin(s.cfg->target_id, *s.test_grid);
  return Norm(model.Forward(*s.test_grid) - truth) / Norm(truth);
}

SolverSummary RunOne(const Shared& s, const std::string& solver) {
  const ExperimentConfig& cfg = *s.cfg;
  const fs::path dir = fs::path(cfg.output_dir) / solver;
  EnsureDirectory(dir);

  SolverSummary summary;
  summary.solver = solver;
  TheoryConstants constants =
      ScalarConstants(cfg.tau, s.energy->StrongConvexity(), s.energy->GradientLipschitz());
  constants.epsilon = cfg.epsilon;
  constants.delta = cfg.delta;

  std::vector<GridFunction> iterates;
  if (solver == "exact") {
    WriteTrajectoryCsv((dir / "trajectory.csv").string(), ReferenceRecords(*s.reference, *s.energy));
    iterates = s.reference->steps;
    summary.final_energy = s.energy->Value(iterates.back());
    summary.rel_l2 = kNaN;
  } else {
    const MmsRun run =
        RunMms(s.initial, cfg.ToMmsConfig(ParseSolverKind(solver)), *s.energy, s.grid, s.reference);
    WriteTrajectoryCsv((dir / "trajectory.csv").string(), run.records);
    WriteCheckpoint((dir / "params.csv").string(), *run.final_model);
    iterates = run.iterates;
    summary.final_energy = run.records.back().energy;
    summary.rel_l2 = RelativeL2(s, *run.final_model);
    for (const auto& r : run.records) summary.wall_time += r.wall_time;
    summary.failed = run.failed;
    summary.failure = run.failure;
  }
  WriteIteratesCsv((dir / "iterates.csv").string(), iterates);

  const std::vector<GridFunction> exact(s.reference->steps.begin(),
                                        s.reference->steps.begin() +
                                            static_cast<std::ptrdiff_t>(iterates.size()));
  const TrackingCertificate cert = CertifyTracking(iterates, exact, *s.energy, constants);
  WriteCertificateCsv((dir / "certificate.csv").string(), cert);
  WriteText(dir / "certificate.txt", CertificateReport(cert, constants));
  summary.final_tracking_error = cert.errors.back();
  summary.certificate_pass = cert.passed();
  return summary;
}

}  // namespace

PointFunction BuiltinTarget(const std::string& id) {
  using Row = Eigen::Ref<const Eigen::RowVectorXd>;
  if (id == "zero") return [](const Row&) { return 0.0; };
  if (id == "square") return [](const Row& x) { return x.squaredNorm(); };
  if (id == "linear") return [](const Row& x) { return x.sum(); };
  if (id == "cos_sum") {
    return [](const Row& x) { return (std::numbers::pi * x.array()).cos().sum(); };
  }
  if (id == "track1d") {
    return [](const Row& x) {
      const double t = x[0];
      return t * t + 0.3 * std::sin(2.0 * std::numbers::pi * t) + 0.2 * std::cos(3.0 * std::numbers::pi * t);
    };
  }
  throw ParameterError("unknown builtin target '" + id +
                       "' (expected zero, square, linear, cos_sum or track1d)");
}

GridFunction SampleBuiltin(const std::string& id, const GridPtr& grid) {
  const PointFunction f = BuiltinTarget(id);
  Vector values(grid->size());
  for (int i = 0; i < grid->size(); ++i) values[i] = f(grid->points().row(i));
  return GridFunction(grid, std::move(values));
}

void ExperimentConfig::Set(const std::string& key, const std::string& value) {
  for (const KeySpec& spec : Keys()) {
    if (key == spec.key) {
      spec.set(*this, Trim(value));
      return;
    }
  }
  throw ParameterError("unknown config key '" + key + "'");
}

void ExperimentConfig::ApplyPreset(const std::string& name) {
  preset = name;
  if (name == "track1d") {
    range_lo = -1.0;
    range_hi = 1.0;
    count = 256;
    dimension = 1;
    sampling = "uniform-grid";
    target_id = "track1d";
    target_csv.clear();
    initial_id = "square";
    pretrain_iters = 2000;
    pretrain_lr = 1e-3;
    hidden_widths = {32};
    tau = 0.1;
    outer_steps = 30;
    gn_inner_steps = 5;
    // The pretrained 1D net has a numerically rank-deficient Jacobian and
    // undamped steps are all rejected by the line search.
    lm_damping = 1e-3;
  } else if (name == "regress10d") {
    range_lo = -1.0;
    range_hi = 1.0;
    count = 1000;
    dimension = 10;
    sampling = "iid-uniform";
    target_id = "cos_sum";
    target_csv.clear();
    initial_id.clear();
    hidden_widths = {32};
    tau = 0.1;
    outer_steps = 10;
    gn_inner_steps = 5;
  } else if (name == "csv_regression") {
    target_id.clear();
    initial_id.clear();
    standardize = true;
    hidden_widths = {32};
    tau = 0.1;
    outer_steps = 10;
    gn_inner_steps = 5;
  } else if (name != "custom") {
    throw ParameterError("unknown preset '" + name +
                         "' (expected track1d, regress10d, csv_regression or custom)");
  }
}

void ExperimentConfig::Validate() const {
  if (!seed) throw ParameterError("a seed is required");
  if (target_id.empty() == target_csv.empty()) {
    throw ParameterError("exactly one of target_id and target_csv must be set");
  }
  if (!target_csv.empty() && (feature_columns.empty() || target_column.empty())) {
    throw ParameterError("CSV targets need feature_columns and target_column");
  }
  if (!target_id.empty()) BuiltinTarget(target_id);
  if (!initial_id.empty()) BuiltinTarget(initial_id);
  if (sampling != "uniform-grid" && sampling != "iid-uniform") {
    throw ParameterError("sampling must be uniform-grid or iid-uniform");
  }
  if (count < 1 || dimension < 1) throw ParameterError("count and dimension must be positive");
  if (!(range_hi > range_lo)) throw ParameterError("range_hi must exceed range_lo");
  if (solvers.empty()) throw ParameterError("solver sweep is empty");
  for (const auto& s : solvers) {
    if (s != "exact") ParseSolverKind(s);
  }
  ParsePretrainOptimizer(pretrain_optimizer);
  ParseInitScheme(init);
  if (test_points < 1) throw ParameterError("test_points must be positive");
  for (const auto& s : solvers) {
    if (s != "exact") ToMmsConfig(ParseSolverKind(s)).Validate();
  }
}

std::string ExperimentConfig::ToText() const {
  std::string out;
  for (const KeySpec& spec : Keys()) out += fmt::format("{} = {}\n", spec.key, spec.get(*this));
  return out;
}

MmsConfig ExperimentConfig::ToMmsConfig(SolverKind solver) const {
  MmsConfig m;
  m.tau = tau;
  m.outer_steps = outer_steps;
  m.solver = solver;
  m.gn.inner_steps = gn_inner_steps;
  m.gn.lm_damping = lm_damping;
  m.gn.cg.max_iters = cg_max_iters;
  m.gn.cg.rel_tolerance = cg_tolerance;
  m.gn.line_search.contraction = ls_shrink;
  m.gn.line_search.max_backtracks = ls_max_backtracks;
  m.gn.line_search.max_step_norm = ls_max_step_norm;
  m.adam.learning_rate = adam_lr;
  m.adam.inner_iters = adam_iters;
  m.gd.learning_rate = gd_lr;
  m.gd.inner_iters = gd_iters;
  m.seed = seed.value_or(0);
  m.theory.enabled = theory;
  m.theory.epsilon = epsilon;
  m.theory.delta = delta;
  m.theory.lipschitz_pairs = lipschitz_pairs;
  m.theory.lipschitz_radius = lipschitz_radius;
  return m;
}

MlpArchitecture ExperimentConfig::Architecture() const {
  MlpArchitecture a;
  a.input_dim = target_csv.empty() ? dimension : static_cast<int>(feature_columns.size());
  a.hidden_widths = hidden_widths;
  a.output_dim = 1;
  a.init = ParseInitScheme(init);
  return a;
}

std::vector<std::string> ExperimentConfigKeys() {
  std::vector<std::string> out;
  for (const KeySpec& spec : Keys()) out.emplace_back(spec.key);
  return out;
}

std::map<std::string, std::string> ParseKeyValueFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file '" + path + "'");
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw IngestionError("expected 'key = value' in '" + path + "'", row);
    }
    out[Trim(line.substr(0, eq))] = Trim(line.substr(eq + 1));
  }
  return out;
}

ExperimentConfig ResolveConfig(const std::optional<std::string>& file,
                               const std::map<std::string, std::string>& overrides) {
  std::map<std::string, std::string> from_file;
  if (file) from_file = ParseKeyValueFile(*file);

  ExperimentConfig cfg;
  std::string preset = "custom";
  if (auto it = from_file.find("preset"); it != from_file.end()) preset = it->second;
  if (auto it = overrides.find("preset"); it != overrides.end()) preset = it->second;
  cfg.ApplyPreset(preset);
  for (const auto& [k, v] : from_file) {
    if (k != "preset") cfg.Set(k, v);
  }
  for (const auto& [k, v] : overrides) {
    if (k != "preset") cfg.Set(k, v);
  }
  cfg.Validate();
  return cfg;
}

bool ExperimentResult::all_certificates_pass() const {
  for (const auto& s : solvers) {
    if (!s.certificate_pass) return false;
  }
  return true;
}

bool ExperimentResult::any_failure() const {
  for (const auto& s : solvers) {
    if (s.failed) return true;
  }
  return false;
}

ProblemData BuildProblem(const ExperimentConfig& cfg) {
  if (!cfg.target_csv.empty()) {
    IngestedData data =
        IngestCsv(cfg.target_csv, cfg.feature_columns, cfg.target_column, cfg.standardize);
    std::optional<Standardization> transform;
    if (cfg.standardize) transform = std::move(data.transform);
    return ProblemData{data.grid, data.target, std::move(transform)};
  }
  const GridPtr grid = BuildGrid(cfg, cfg.count, cfg.seed.value_or(0));
  return ProblemData{grid, SampleBuiltin(cfg.target_id, grid), std::nullopt};
}

ExperimentResult RunExperiment(const ExperimentConfig& cfg) {
  cfg.Validate();
  const fs::path root(cfg.output_dir);
  EnsureDirectory(root);
  WriteText(root / "config.txt", cfg.ToText());

  const ProblemData problem = BuildProblem(cfg);
  if (problem.transform) {
    WriteStandardization((root / "standardization.csv").string(), *problem.transform);
  }
  WriteGridFunctionCsv((root / "grid.csv").string(), problem.target);
  const QuadraticRegressionEnergy energy(problem.target);

  MlpModel initial = MlpModel::Initialize(cfg.Architecture(), *cfg.seed);
  if (!cfg.initial_id.empty()) {
    PretrainConfig pre{SampleBuiltin(cfg.initial_id, problem.grid), cfg.pretrain_iters,
                       cfg.pretrain_lr, ParsePretrainOptimizer(cfg.pretrain_optimizer), 0.0};
    const PretrainResult fitted = PretrainFit(initial, pre);
    initial = fitted.model;
    WriteText(root / "pretrain.txt",
              fmt::format("iterations {}\nfit_error {}\n", fitted.iters_run,
                          FormatNumber(fitted.fit_error)));
  }
  WriteCheckpoint((root / "initial_params.csv").string(), initial);

  const ExactTrajectory reference =
      BuildExactTrajectory(initial.Forward(problem.grid), problem.target, cfg.tau, cfg.outer_steps);
  WriteTrajectoryCsv((root / "reference_trajectory.csv").string(),
                     ReferenceRecords(reference, energy));
  WriteIteratesCsv((root / "reference_iterates.csv").string(), reference.steps);

  Shared shared{&cfg, problem.grid, &energy, initial, &reference, std::nullopt};
  if (!cfg.target_id.empty()) {
    ExperimentConfig test = cfg;
    test.sampling = cfg.dimension == 1 ? "uniform-grid" : "iid-uniform";
    shared.test_grid = BuildGrid(test, cfg.test_points, *cfg.seed + 1);
  }

  ExperimentResult result;
  if (cfg.parallel) {
    std::vector<std::future<SolverSummary>> jobs;
    for (const auto& s : cfg.solvers) {
      jobs.push_back(std::async(std::launch::async, [&shared, s] { return RunOne(shared, s); }));
    }
    for (auto& j : jobs) result.solvers.push_back(j.get());
  } else {
    for (const auto& s : cfg.solvers) result.solvers.push_back(RunOne(shared, s));
  }

  std::ofstream summary(root / "summary.csv");
  if (!summary) throw InputError("cannot write summary.csv");
  summary << "solver,energy,tracking_error,rel_l2,time_s,certificate,failed\n";
  for (const auto& s : result.solvers) {
    summary << s.solver << ',' << FormatNumber(s.final_energy) << ','
            << FormatNumber(s.final_tracking_error) << ',' << FormatNumber(s.rel_l2) << ','
            << FormatNumber(s.wall_time) << ',' << (s.certificate_pass ? "pass" : "fail") << ','
            << (s.failed ? 1 : 0) << '\n';
  }
  return result;
}

}  // namespace nmms
