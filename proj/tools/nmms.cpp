// nmms: run experiments, certify recorded trajectories, compare outputs.
//
// Exit status: 0 when every certificate passes, 2 on a certificate failure,
// 1 on any runtime error (bad input, solver breakdown).

#include <fmt/format.h>

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>

#include "nmms/error.hpp"
#include "nmms/experiment.hpp"
#include "nmms/io.hpp"
#include "nmms/reference.hpp"
#include "nmms/theory.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeError = 1;
constexpr int kCertificateFailure = 2;

using nmms::FormatNumber;

int RunVerb(const std::optional<std::string>& config_file,
            const std::map<std::string, std::string>& overrides) {
  const nmms::ExperimentConfig cfg = nmms::ResolveConfig(config_file, overrides);
  const nmms::ExperimentResult result = nmms::RunExperiment(cfg);

  fmt::print("solver,energy,tracking_error,rel_l2,time_s,certificate\n");
  for (const auto& s : result.solvers) {
    fmt::print("{},{},{},{},{},{}\n", s.solver, FormatNumber(s.final_energy),
               FormatNumber(s.final_tracking_error), FormatNumber(s.rel_l2),
               FormatNumber(s.wall_time), s.certificate_pass ? "pass" : "fail");
    if (s.failed) fmt::print(stderr, "{}: {}\n", s.solver, s.failure);
  }
  fmt::print("outputs in {}\n", cfg.output_dir);
  if (result.any_failure()) return kRuntimeError;
  return result.all_certificates_pass() ? kOk : kCertificateFailure;
}

struct CertifyArgs {
  std::string iterates;
  std::string grid;
  std::string reference;
  double tau = 0.0;
  double eps = 0.0;
  std::string out;
};

int CertifyVerb(const CertifyArgs& args) {
  const nmms::GridFunction target = nmms::ReadGridFunctionCsv(args.grid);
  const nmms::QuadraticRegressionEnergy energy(target);
  const auto nn = nmms::ReadIteratesCsv(args.iterates, target.grid());
  if (nn.empty()) throw nmms::InputError("iterates file has no rows");

  std::vector<nmms::GridFunction> exact;
  if (args.reference.empty()) {
    exact = nmms::BuildExactTrajectory(nn.front(), target, args.tau,
                                       static_cast<int>(nn.size()) - 1)
                .steps;
  } else {
    exact = nmms::ReadIteratesCsv(args.reference, target.grid());
  }

  nmms::TheoryConstants c =
      nmms::ScalarConstants(args.tau, energy.StrongConvexity(), energy.GradientLipschitz());
  c.epsilon = args.eps;
  const nmms::TrackingCertificate cert = nmms::CertifyTracking(nn, exact, energy, c);

  fmt::print("n,e_n,inner_residual,bound,e_next,pass\n");
  for (const auto& s : cert.steps) {
    fmt::print("{},{},{},{},{},{}\n", s.n, FormatNumber(s.e_n), FormatNumber(s.inner_residual),
               FormatNumber(s.bound), FormatNumber(s.e_next), s.pass ? 1 : 0);
  }
  const std::string report = nmms::CertificateReport(cert, c);
  fmt::print("{}", report);
  if (!args.out.empty()) {
    std::filesystem::create_directories(args.out);
    nmms::WriteCertificateCsv((std::filesystem::path(args.out) / "certificate.csv").string(),
                              cert);
    std::ofstream((std::filesystem::path(args.out) / "certificate.txt")) << report;
  }
  return cert.passed() ? kOk : kCertificateFailure;
}

bool IsIteratesTable(const nmms::CsvTable& t) {
  return t.header.size() >= 2 && t.header[0] == "step" && t.header[1] == "u_0";
}

int CompareVerb(const std::string& a_path, const std::string& b_path,
                const std::string& grid_path) {
  const nmms::CsvTable a = nmms::ReadCsv(a_path);
  const nmms::CsvTable b = nmms::ReadCsv(b_path);

  if (IsIteratesTable(a) != IsIteratesTable(b)) {
    throw nmms::InputError("cannot compare an iterates file with a trajectory file");
  }
  if (IsIteratesTable(a)) {
    nmms::GridPtr grid;
    if (!grid_path.empty()) {
      grid = nmms::ReadGridFunctionCsv(grid_path).grid();
    } else {
      // Without a grid file, use the empirical measure on as many points as columns.
      grid = nmms::SampleGrid::Linspace(0.0, 1.0, static_cast<int>(a.header.size()) - 1);
    }
    const auto ua = nmms::ReadIteratesCsv(a_path, grid);
    const auto ub = nmms::ReadIteratesCsv(b_path, grid);
    const std::size_t rows = std::min(ua.size(), ub.size());
    fmt::print("step,tracking_error\n");
    for (std::size_t n = 0; n < rows; ++n) {
      fmt::print("{},{}\n", n, FormatNumber(nmms::Norm(ua[n] - ub[n])));
    }
    return kOk;
  }

  std::vector<std::pair<std::size_t, std::size_t>> shared;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < a.header.size(); ++i) {
    const std::string& name = a.header[i];
    if (name == "step" || name == "wall_time") continue;
    for (std::size_t j = 0; j < b.header.size(); ++j) {
      if (b.header[j] == name) {
        shared.emplace_back(i, j);
        names.push_back(name + "_diff");
      }
    }
  }
  const std::size_t rows = std::min(a.rows.size(), b.rows.size());
  std::vector<double> max_abs(shared.size(), 0.0);
  fmt::print("step");
  for (const auto& n : names) fmt::print(",{}", n);
  fmt::print("\n");
  for (std::size_t r = 0; r < rows; ++r) {
    fmt::print("{}", r);
    for (std::size_t k = 0; k < shared.size(); ++k) {
      const double d = a.Number(r, shared[k].first) - b.Number(r, shared[k].second);
      if (std::isfinite(d)) max_abs[k] = std::max(max_abs[k], std::abs(d));
      fmt::print(",{}", FormatNumber(d));
    }
    fmt::print("\n");
  }
  if (a.rows.size() != b.rows.size()) {
    fmt::print(stderr, "row counts differ: {} vs {}\n", a.rows.size(), b.rows.size());
  }
  for (std::size_t k = 0; k < shared.size(); ++k) {
    fmt::print(stderr, "max |{}| = {}\n", names[k], FormatNumber(max_abs[k]));
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural minimizing-movement runner"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run an experiment preset or config file");
  std::string config_file;
  std::vector<std::string> sets;
  run->add_option("-c,--config", config_file, "key = value config file")->check(CLI::ExistingFile);
  run->add_option("--set", sets, "Override as key=value (repeatable)");
  std::map<std::string, std::string> flag_values;
  for (const std::string& key : nmms::ExperimentConfigKeys()) {
    run->add_option_function<std::string>(
        "--" + key, [&flag_values, key](const std::string& v) { flag_values[key] = v; },
        "Override '" + key + "'");
  }

  auto* certify = app.add_subcommand("certify", "Certify a recorded trajectory of iterates");
  CertifyArgs cargs;
  certify->add_option("--iterates", cargs.iterates, "Iterates CSV (step,u_0,...)")
      ->required()
      ->check(CLI::ExistingFile);
  certify->add_option("--grid", cargs.grid, "Grid CSV holding the target f*")
      ->required()
      ->check(CLI::ExistingFile);
  certify->add_option("--reference", cargs.reference,
                      "Exact iterates CSV; built from the first iterate when omitted")
      ->check(CLI::ExistingFile);
  certify->add_option("--tau", cargs.tau, "Step size")->required();
  certify->add_option("--eps", cargs.eps, "Approximation error allowance")->default_val(0.0);
  certify->add_option("--out", cargs.out, "Directory for certificate.csv / certificate.txt");

  auto* compare = app.add_subcommand("compare", "Diff two trajectory or iterates CSVs");
  std::string a_path, b_path, grid_path;
  compare->add_option("a", a_path)->required()->check(CLI::ExistingFile);
  compare->add_option("b", b_path)->required()->check(CLI::ExistingFile);
  compare->add_option("--grid", grid_path, "Grid CSV providing the weights for iterates")
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kRuntimeError;
  }

  try {
    if (*run) {
      std::map<std::string, std::string> overrides;
      for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw nmms::ParameterError("--set expects key=value, got '" + s + "'");
        overrides[s.substr(0, eq)] = s.substr(eq + 1);
      }
      for (const auto& [k, v] : flag_values) overrides[k] = v;
      return RunVerb(config_file.empty() ? std::nullopt : std::optional<std::string>(config_file),
                     overrides);
    }
    if (*certify) {
      if (!(cargs.tau > 0.0)) throw nmms::ParameterError("--tau must be positive");
      return CertifyVerb(cargs);
    }
    return CompareVerb(a_path, b_path, grid_path);
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kRuntimeError;
  }
}
