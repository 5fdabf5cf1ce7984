// Acceptance checks. Each criterion prints one line
//
//   [PASS|FAIL] <id> <name>: <measured quantities> (<seconds> s, budget <b> s)
//
// and the exit status is nonzero when any criterion fails. A criterion
// passes only if its property holds and it finished within its budget.

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "nmms/experiment.hpp"
#include "nmms/hilbert.hpp"
#include "nmms/mms.hpp"
#include "nmms/network.hpp"
#include "nmms/reference.hpp"
#include "nmms/solvers.hpp"
#include "nmms/theory.hpp"
#include "oracles.hpp"

namespace nmms {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string G(double x) { return fmt::format("{:.6g}", x); }

// ---------------------------------------------------------------------------

Outcome ExactReferenceIdentity() {
  const GridPtr grid = SampleGrid::Linspace(-1, 1, 256);
  const GridFunction f = SampleBuiltin("track1d", grid);
  const GridFunction u0 = SampleBuiltin("square", grid);
  const double gap0 = Norm(u0 - f);
  double worst_recursion = 0.0;
  double worst_decay = 0.0;
  for (double tau : {0.1, 0.01, 0.001}) {
    const ExactTrajectory traj = BuildExactTrajectory(u0, f, tau, 200);
    for (int n = 0; n <= 200; ++n) {
      const GridFunction closed = ExactMmsClosed(u0, f, tau, n);
      worst_recursion = std::max(
          worst_recursion, (traj.steps[n].values() - closed.values()).cwiseAbs().maxCoeff());
      const double predicted = std::pow(1.0 + tau, -n) * gap0;
      worst_decay = std::max(worst_decay, std::abs(Norm(traj.steps[n] - f) - predicted));
    }
  }
  return {worst_recursion <= 1e-12 && worst_decay <= 1e-12,
          fmt::format("max |recursion - closed| = {}, max |decay - (1+tau)^-n| = {}",
                      G(worst_recursion), G(worst_decay))};
}

Outcome ProxContraction() {
  std::mt19937_64 rng(2024);
  const GridPtr grid = SampleGrid::Linspace(-1, 1, 256);
  const QuadraticRegressionEnergy energy(testing::RandomFunction(grid, rng));
  const double tau = 0.1;
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const GridFunction x = testing::RandomFunction(grid, rng);
    const GridFunction y = testing::RandomFunction(grid, rng);
    const double ratio =
        Norm(ExactProx(x, tau, energy) - ExactProx(y, tau, energy)) / Norm(x - y);
    worst = std::max(worst, std::abs(ratio - 1.0 / (1.0 + tau)));
  }
  return {worst <= 1e-10, fmt::format("max |ratio - 1/(1+tau)| = {} over 100 pairs", G(worst))};
}

Outcome GnExactness() {
  std::mt19937_64 rng(7);
  const int p = 20, n = 100;
  const double tau = 0.1;
  const GridPtr grid = testing::RandomGrid(n, p - 1, rng);
  const MlpModel model = testing::LinearModel(p, rng);
  const QuadraticRegressionEnergy energy(testing::RandomFunction(grid, rng));
  const SubproblemSpec spec = SubproblemSpec::WarmStart(model, energy, tau, grid);

  GnConfig cfg;
  cfg.inner_steps = 1;
  cfg.lm_damping = 0.0;
  cfg.cg.max_iters = 10 * p;
  cfg.cg.rel_tolerance = 1e-14;
  cfg.line_search.max_step_norm = kInf;
  const GnStepResult step = GnStep(spec, cfg, model.params());

  const Vector oracle = testing::RegularizedLeastSquares(
      testing::LinearFeatures(*grid), spec.anchor.values(), energy.target().values(), tau);
  const double dist = (step.params - oracle).norm();
  return {dist <= 1e-8 && step.diag.accepted_step == 1.0,
          fmt::format("|w_GN - w_oracle| = {}, step {}, CG iters {}", G(dist),
                      G(step.diag.accepted_step), step.diag.cg_iters)};
}

Outcome JacobianCorrectness() {
  std::mt19937_64 rng(11);
  double worst = 0.0;
  for (int width : {4, 8, 16, 24, 32}) {
    MlpArchitecture arch;
    arch.input_dim = 2;
    arch.hidden_widths = {width};
    // Biases are zero at initialization; perturb everything so every entry is exercised.
    const MlpModel base = MlpModel::Initialize(arch, rng());
    const MlpModel model =
        base.WithParams(base.params() + 0.5 * testing::RandomVector(base.parameter_count(), rng));
    const GridPtr grid = testing::RandomGrid(32, 2, rng);
    const Matrix exact = model.Jacobian(grid);
    const Matrix fd = testing::FiniteDifferenceJacobian(model, grid, 1e-5);
    for (int i = 0; i < exact.rows(); ++i)
      for (int j = 0; j < exact.cols(); ++j)
        worst = std::max(worst, std::abs(exact(i, j) - fd(i, j)) / std::max(1.0, std::abs(fd(i, j))));
  }
  return {worst <= 1e-5,
          fmt::format("max relative entry error (unit floor) = {} over widths 4..32", G(worst))};
}

Outcome PreconditionerScaling() {
  std::mt19937_64 rng(13);
  double worst = 0.0;
  double worst_cos = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    for (double tau : {0.01, 0.1, 1.0}) {
      MlpArchitecture arch;
      arch.hidden_widths = {3 + trial};
      const MlpModel model = MlpModel::Initialize(arch, rng());
      const GridPtr grid = SampleGrid::Linspace(-1, 1, 64);
      const QuadraticRegressionEnergy energy(testing::RandomFunction(grid, rng));
      const SubproblemSpec spec = SubproblemSpec::WarmStart(model, energy, tau, grid);
      const Vector w = model.params() + 0.3 * testing::RandomVector(model.parameter_count(), rng);
      const RawDirections d = GaussNewtonRawDirections(spec, w);
      const double ratio = 1.0 / (1.0 + 1.0 / tau);
      worst = std::max(worst, (d.scaled - ratio * d.unscaled).norm() / d.unscaled.norm());
      worst_cos = std::max(
          worst_cos, 1.0 - d.scaled.dot(d.unscaled) / (d.scaled.norm() * d.unscaled.norm()));
    }
  }
  return {worst <= 1e-10 && worst_cos <= 1e-10,
          fmt::format("max |scaled - ratio*unscaled|/|unscaled| = {}, max 1 - cos = {}", G(worst),
                      G(worst_cos))};
}

// Preset track1d with the given overrides, run through the library.
struct PresetRun {
  ExperimentConfig cfg;
  ProblemData problem;
  MmsRun run;
  ExactTrajectory reference;
};

PresetRun RunPreset(const std::string& preset, const std::map<std::string, std::string>& extra,
                    SolverKind solver) {
  std::map<std::string, std::string> overrides = extra;
  overrides["preset"] = preset;
  overrides["seed"] = "0";
  const ExperimentConfig cfg = ResolveConfig(std::nullopt, overrides);
  ProblemData problem = BuildProblem(cfg);
  MlpModel initial = MlpModel::Initialize(cfg.Architecture(), *cfg.seed);
  if (!cfg.initial_id.empty()) {
    PretrainConfig pre{SampleBuiltin(cfg.initial_id, problem.grid), cfg.pretrain_iters,
                       cfg.pretrain_lr, ParsePretrainOptimizer(cfg.pretrain_optimizer), 0.0};
    initial = PretrainFit(initial, pre).model;
  }
  ExactTrajectory reference =
      BuildExactTrajectory(initial.Forward(problem.grid), problem.target, cfg.tau, cfg.outer_steps);
  const QuadraticRegressionEnergy energy(problem.target);
  MmsRun run = RunMms(initial, cfg.ToMmsConfig(solver), energy, problem.grid, &reference);
  return {cfg, std::move(problem), std::move(run), std::move(reference)};
}

Outcome TrackingCertificateCriterion() {
  const PresetRun pr = RunPreset("track1d", {}, SolverKind::kGaussNewton);
  if (pr.run.failed) return {false, "run failed: " + pr.run.failure};
  const QuadraticRegressionEnergy energy(pr.problem.target);
  TheoryConstants c = ScalarConstants(pr.cfg.tau, 1.0, 1.0);
  c.epsilon = 0.0;
  const TrackingCertificate cert = CertifyTracking(pr.run.iterates, pr.reference.steps, energy, c);
  int failing = 0;
  for (const auto& s : cert.steps) failing += s.pass ? 0 : 1;
  double min_global_margin = kInf;
  for (const auto& g : cert.global) {
    min_global_margin = std::min(min_global_margin, g.bound - g.distance_to_minimizer);
  }
  return {cert.passed() && cert.steps.size() == 30 && cert.global.size() == 31,
          fmt::format("recurrence {} ({} failing of {}), global {} (min margin {}), sup e_n = {}, "
                      "final e_N = {}",
                      cert.recurrence_pass ? "holds" : "broken", failing, cert.steps.size(),
                      cert.global_pass ? "holds" : "broken", G(min_global_margin),
                      G(cert.sup_error), G(cert.errors.back()))};
}

Outcome GnBeatsGd() {
  const std::map<std::string, std::string> extra = {{"tau", "0.01"}, {"theory", "false"}};
  const PresetRun gn = RunPreset("track1d", extra, SolverKind::kGaussNewton);
  const PresetRun gd = RunPreset("track1d", extra, SolverKind::kGradientDescent);
  if (gn.run.failed || gd.run.failed) return {false, "run failed"};
  const double e_gn = gn.run.records.back().tracking_error;
  const double e_gd = gd.run.records.back().tracking_error;
  // Seed-0 values frozen as regression bounds: GN 0.0154933, GD 0.0606006.
  return {e_gn < e_gd && e_gn <= 0.01550,
          fmt::format("tau = 0.01, final tracking error GN(K=5) = {}, GD(500) = {} "
                      "(GN regression bound 0.0155)",
                      G(e_gn), G(e_gd))};
}

Outcome ConstantCoherence() {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> logu(-3, 2);
  MlpArchitecture arch;
  arch.hidden_widths = {3};
  const GridPtr grid = SampleGrid::Linspace(-1, 1, 12);
  ConstantsOptions opts;
  opts.lipschitz_pairs = 2;
  double worst = 0.0;
  double worst_cv = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const double tau = std::pow(10.0, logu(rng));
    const double m = std::pow(10.0, logu(rng));
    const double l = m + std::pow(10.0, logu(rng));
    const TheoryConstants c = ScalarConstants(tau, m, l);
    worst = std::max(worst, std::abs(c.kappa * c.nu - c.mu) / c.mu);
    worst = std::max(worst, std::abs(c.rho * (1 + tau * m) - 1.0));
    const double f = std::pow(10.0, logu(rng));
    const double k = SublevelRadius(tau, m, f);
    worst = std::max(worst, std::abs(k * k - 2 * tau * f / (1 + tau * m)) / (k * k));

    // At F[v] = 0 the data condition vanishes.
    const MlpModel model = MlpModel::Initialize(arch, static_cast<std::uint64_t>(t));
    const GridFunction v = model.Forward(grid);
    const QuadraticRegressionEnergy energy(v);
    opts.seed = static_cast<std::uint64_t>(t);
    const TheoryConstants cv = ComputeConstants(tau, energy, v, model, grid, 0.0, 1e-2, opts);
    worst_cv = std::max({worst_cv, std::abs(cv.C_v), std::abs(cv.K_v)});
  }
  return {worst <= 1e-12 && worst_cv <= 1e-12,
          fmt::format("max identity defect = {}, max |C_v|,|K_v| at F[v]=0 = {} (1000 triples)",
                      G(worst), G(worst_cv))};
}

Outcome ThresholdFormulas() {
  bool examples = true;
  std::string notes;
  auto with = [](TheoryConstants c, double eps, double delta) {
    c.epsilon = eps;
    c.delta = delta;
    return c;
  };
  // T: log argument 1, the log 2 case, and doubling Cbar.
  {
    const TheoryConstants c = with(ScalarConstants(0.5, 1, 1), 0.0, 0.03);
    examples &= InnerHorizonT(0.01, c).value == 0.0;
    const TheoryConstants u = with(ScalarConstants(1, 1, 1), 0.0, 1.0);
    examples &= InnerHorizonT(1.0, u).value == std::log(2.0);
    const TheoryConstants d = with(ScalarConstants(0.1, 1, 2), 1e-4, 1e-2);
    examples &= std::abs(InnerHorizonT(6.0, d).value - InnerHorizonT(3.0, d).value -
                         (2.0 / d.nu) * std::log(2.0)) <= 1e-14;
  }
  // K: argument <= 1, and the q = sqrt(3)/2, argument 2 arithmetic.
  {
    const TheoryConstants c = with(ScalarConstants(1, 1, 1), 0.0, 1.0);
    examples &= InnerItersK(0.5, 0.1, c).count == 0;
    const auto k = DiscreteIterationCount(std::sqrt(3.0) / 2.0, std::log(2.0));
    examples &= k.count == static_cast<long long>(
                               std::ceil(std::log(2.0) / std::log(2.0 / std::sqrt(3.0))));
    examples &= k.count == 5;
  }
  // Small-step limit: same constants and log argument for both thresholds.
  const TheoryConstants c = with(ScalarConstants(1, 1, 1), 0.0, 0.1);
  const double bound = 5.0;
  const double t = InnerHorizonT(bound, c).value;
  const double eta = 1e-4;
  const double k_eta = static_cast<double>(InnerItersK(bound, eta, c).count) * eta;
  const double rel = std::abs(k_eta - t) / t;
  return {examples && rel <= 0.05,
          fmt::format("examples {}, at eta = 1e-4: K*eta = {}, T = {}, K*eta/T = {}, "
                      "relative gap {} (limit 0.05)",
                      examples ? "exact" : "WRONG", G(k_eta), G(t), G(k_eta / t), G(rel))};
}

struct MonotoneStats {
  int accepted = 0;
  int accepted_violations = 0;
  int outer_violations = 0;
  double worst_outer = -kInf;  // max of lhs - rhs
};

void CheckMonotone(const PresetRun& pr, MonotoneStats& s) {
  const double tau = pr.cfg.tau;
  for (const auto& trace : pr.run.inner_traces) {
    for (const auto& d : trace) {
      if (!d.accepted) continue;
      ++s.accepted;
      if (!(d.objective_after < d.objective_before)) ++s.accepted_violations;
    }
  }
  for (std::size_t n = 1; n < pr.run.records.size(); ++n) {
    const MmsRecord& r = pr.run.records[n];
    const double prev = pr.run.records[n - 1].energy;
    const double lhs = r.energy + r.function_step_norm * r.function_step_norm / (2 * tau);
    s.worst_outer = std::max(s.worst_outer, lhs - prev);
    if (lhs > prev + 1e-12 * std::abs(prev)) ++s.outer_violations;
  }
}

Outcome EnergyMonotonicity() {
  const std::map<std::string, std::string> extra = {{"theory", "false"}};
  MonotoneStats s1, s10;
  const PresetRun a = RunPreset("track1d", extra, SolverKind::kGaussNewton);
  CheckMonotone(a, s1);
  const PresetRun b = RunPreset("regress10d", extra, SolverKind::kGaussNewton);
  CheckMonotone(b, s10);
  const bool ok = !a.run.failed && !b.run.failed && s1.accepted_violations == 0 &&
                  s10.accepted_violations == 0 && s1.outer_violations == 0 &&
                  s10.outer_violations == 0;
  return {ok, fmt::format("track1d: {} accepted inner steps, {} non-decreasing, {} outer "
                          "violations (max excess {}); regress10d: {} accepted, {} non-decreasing, "
                          "{} outer violations (max excess {})",
                          s1.accepted, s1.accepted_violations, s1.outer_violations,
                          G(s1.worst_outer), s10.accepted, s10.accepted_violations,
                          s10.outer_violations, G(s10.worst_outer))};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> check;
};

}  // namespace
}  // namespace nmms

int main() {
  using namespace nmms;
  const std::vector<Criterion> criteria = {
      {1, "exact-reference identity", 1.0, ExactReferenceIdentity},
      {2, "prox contraction", 1.0, ProxContraction},
      {3, "GN exactness on linear models", 1.0, GnExactness},
      {4, "Jacobian correctness", 5.0, JacobianCorrectness},
      {5, "preconditioner-scaling equivalence", 1.0, PreconditionerScaling},
      {6, "tracking-recurrence certificate", 60.0, TrackingCertificateCriterion},
      {7, "GN tracks better than GD", 120.0, GnBeatsGd},
      {8, "constant-pack coherence", 1.0, ConstantCoherence},
      {9, "threshold formulas", 1.0, ThresholdFormulas},
      {10, "energy monotonicity", 180.0, EnergyMonotonicity},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool pass = o.pass && secs <= c.budget_s;
    failures += pass ? 0 : 1;
    fmt::print("[{}] {} {}: {} ({:.3f} s, budget {} s)\n", pass ? "PASS" : "FAIL", c.id, c.name,
               o.detail, secs, c.budget_s);
    std::fflush(stdout);
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
