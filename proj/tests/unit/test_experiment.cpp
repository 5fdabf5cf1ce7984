#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "nmms/error.hpp"
#include "nmms/experiment.hpp"
#include "temp_dir.hpp"

namespace nmms {
namespace {

using testing::TempDir;
using testing::WriteText;

TEST(BuiltinTarget, Values) {
  Eigen::RowVectorXd x(2);
  x << 0.5, -1.0;
  EXPECT_DOUBLE_EQ(BuiltinTarget("square")(x), 1.25);
  EXPECT_DOUBLE_EQ(BuiltinTarget("linear")(x), -0.5);
  EXPECT_NEAR(BuiltinTarget("cos_sum")(x), -1.0, 1e-15);
  EXPECT_EQ(BuiltinTarget("zero")(x), 0.0);
  Eigen::RowVectorXd t(1);
  t << 0.25;
  EXPECT_DOUBLE_EQ(BuiltinTarget("track1d")(t),
                   0.0625 + 0.3 + 0.2 * std::cos(0.75 * std::numbers::pi));
  EXPECT_THROW(BuiltinTarget("runge"), ParameterError);
}

TEST(ExperimentConfig, SetAndTextRoundTrip) {
  ExperimentConfig a;
  a.ApplyPreset("track1d");
  a.Set("seed", "7");
  a.Set("hidden_widths", "16,8");
  a.Set("solvers", "gn,gd,exact");
  a.Set("tau", "0.025");
  EXPECT_EQ(a.hidden_widths, (std::vector<int>{16, 8}));
  EXPECT_EQ(a.solvers, (std::vector<std::string>{"gn", "gd", "exact"}));

  TempDir dir;
  WriteText(dir / "echo.txt", a.ToText());
  const ExperimentConfig b = ResolveConfig(dir / "echo.txt", {});
  EXPECT_EQ(a.ToText(), b.ToText());
  EXPECT_EQ(b.tau, 0.025);
}

TEST(ExperimentConfig, BadValues) {
  ExperimentConfig c;
  EXPECT_THROW(c.Set("no_such_key", "1"), ParameterError);
  EXPECT_THROW(c.Set("tau", "fast"), ParameterError);
  EXPECT_THROW(c.Set("outer_steps", "2.5"), ParameterError);
  EXPECT_THROW(c.Set("theory", "maybe"), ParameterError);
  EXPECT_THROW(c.Set("seed", "-1"), ParameterError);
  EXPECT_THROW(c.ApplyPreset("mnist"), ParameterError);
}

TEST(ExperimentConfig, Validation) {
  ExperimentConfig c;
  c.ApplyPreset("track1d");
  EXPECT_THROW(c.Validate(), ParameterError);  // no seed
  c.seed = 0;
  EXPECT_NO_THROW(c.Validate());
  c.target_csv = "data.csv";
  EXPECT_THROW(c.Validate(), ParameterError);  // two target sources
  c.target_csv.clear();
  c.solvers = {"sgd"};
  EXPECT_THROW(c.Validate(), ParameterError);
  c.solvers = {"gn"};
  c.tau = -1;
  EXPECT_THROW(c.Validate(), ParameterError);
}

TEST(ResolveConfig, Precedence) {
  TempDir dir;
  WriteText(dir / "c.txt",
            "# comment\npreset = track1d\nseed = 3\ntau = 0.05   # trailing\nouter_steps = 7\n");
  const ExperimentConfig file_only = ResolveConfig(dir / "c.txt", {});
  EXPECT_EQ(file_only.tau, 0.05);  // file beats preset
  EXPECT_EQ(file_only.outer_steps, 7);
  EXPECT_EQ(file_only.count, 256);  // preset beats default
  EXPECT_EQ(file_only.lm_damping, 1e-3);
  EXPECT_EQ(*file_only.seed, 3u);

  const ExperimentConfig flagged =
      ResolveConfig(dir / "c.txt", {{"tau", "0.2"}, {"count", "64"}, {"lm_damping", "0"}});
  EXPECT_EQ(flagged.tau, 0.2);  // override beats file
  EXPECT_EQ(flagged.count, 64);
  EXPECT_EQ(flagged.lm_damping, 0.0);
  EXPECT_EQ(flagged.outer_steps, 7);

  const ExperimentConfig other_preset =
      ResolveConfig(dir / "c.txt", {{"preset", "regress10d"}});
  EXPECT_EQ(other_preset.dimension, 10);
  EXPECT_EQ(other_preset.tau, 0.05);

  WriteText(dir / "bad.txt", "tau 0.1\n");
  EXPECT_THROW(ResolveConfig(dir / "bad.txt", {}), IngestionError);
  EXPECT_THROW(ResolveConfig(dir / "missing.txt", {}), InputError);
}

TEST(BuildProblem, BuiltinGrids) {
  ExperimentConfig c;
  c.ApplyPreset("track1d");
  c.seed = 0;
  const ProblemData p = BuildProblem(c);
  EXPECT_EQ(p.grid->size(), 256);
  EXPECT_EQ(p.grid->points()(0, 0), -1.0);
  EXPECT_EQ(p.grid->points()(255, 0), 1.0);
  EXPECT_FALSE(p.transform.has_value());

  c.ApplyPreset("regress10d");
  const ProblemData q = BuildProblem(c);
  EXPECT_EQ(q.grid->size(), 1000);
  EXPECT_EQ(q.grid->dim(), 10);
  EXPECT_LE(q.grid->points().cwiseAbs().maxCoeff(), 1.0);
  c.seed = 1;
  EXPECT_NE(BuildProblem(c).grid->points(), q.grid->points());
}

TEST(BuildProblem, CsvTargetIsStandardized) {
  TempDir dir;
  WriteText(dir / "d.csv", "u,v,y\n0,1,2\n1,3,4\n2,2,9\n3,0,1\n");
  ExperimentConfig c;
  c.ApplyPreset("csv_regression");
  c.seed = 0;
  c.target_csv = dir / "d.csv";
  c.feature_columns = {"u", "v"};
  c.target_column = "y";
  const ProblemData p = BuildProblem(c);
  EXPECT_EQ(p.grid->dim(), 2);
  ASSERT_TRUE(p.transform.has_value());
  EXPECT_NEAR(p.target.values().mean(), 0.0, 1e-15);
  EXPECT_EQ(c.Architecture().input_dim, 2);
}

TEST(RunExperiment, ExactOnlyHasZeroTrackingError) {
  TempDir dir;
  const ExperimentConfig c =
      ResolveConfig(std::nullopt, {{"preset", "track1d"},
                                   {"seed", "0"},
                                   {"solvers", "exact"},
                                   {"pretrain_iters", "50"},
                                   {"output_dir", dir / "out"}});
  const ExperimentResult r = RunExperiment(c);
  ASSERT_EQ(r.solvers.size(), 1u);
  EXPECT_EQ(r.solvers[0].final_tracking_error, 0.0);
  EXPECT_TRUE(r.all_certificates_pass());
  EXPECT_FALSE(r.any_failure());
  for (const char* f : {"config.txt", "grid.csv", "pretrain.txt", "initial_params.csv",
                        "reference_trajectory.csv", "reference_iterates.csv", "summary.csv",
                        "exact/trajectory.csv", "exact/iterates.csv", "exact/certificate.csv",
                        "exact/certificate.txt"}) {
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "out" / f)) << f;
  }
  const CsvTable traj = ReadCsv(dir / "out/exact/trajectory.csv");
  EXPECT_EQ(traj.rows.size(), 31u);
}

TEST(RunExperiment, CsvRegressionRuns) {
  TempDir dir;
  std::string csv = "a,b,y\n";
  for (int i = 0; i < 40; ++i) {
    const double a = std::sin(0.3 * i), b = std::cos(0.7 * i);
    csv += std::to_string(a) + "," + std::to_string(b) + "," + std::to_string(a * b + a) + "\n";
  }
  WriteText(dir / "d.csv", csv);
  const ExperimentConfig c = ResolveConfig(
      std::nullopt, {{"preset", "csv_regression"},
                     {"seed", "1"},
                     {"target_csv", dir / "d.csv"},
                     {"feature_columns", "a,b"},
                     {"target_column", "y"},
                     {"hidden_widths", "4"},
                     {"outer_steps", "3"},
                     {"solvers", "gn,adam"},
                     {"adam_iters", "20"},
                     {"output_dir", dir / "out"}});
  const ExperimentResult r = RunExperiment(c);
  ASSERT_EQ(r.solvers.size(), 2u);
  EXPECT_FALSE(r.any_failure());
  EXPECT_TRUE(std::isnan(r.solvers[0].rel_l2));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "out" / "standardization.csv"));
}

}  // namespace
}  // namespace nmms
