#include "nmms/mms.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "nmms/error.hpp"

namespace nmms {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Subproblem with no proximal term: minimize 1/2 |u - target|^2.
SubproblemSpec FitSpec(const MlpModel& model, const QuadraticRegressionEnergy& energy) {
  const GridPtr& grid = energy.target().grid();
  return SubproblemSpec::WarmStart(model, energy, std::numeric_limits<double>::infinity(), grid);
}

}  // namespace

std::string ToString(SolverKind kind) {
  switch (kind) {
    case SolverKind::kGaussNewton:
      return "gn";
    case SolverKind::kAdam:
      return "adam";
    case SolverKind::kGradientDescent:
      return "gd";
  }
  return "unknown";
}

SolverKind ParseSolverKind(const std::string& name) {
  if (name == "gn") return SolverKind::kGaussNewton;
  if (name == "adam") return SolverKind::kAdam;
  if (name == "gd") return SolverKind::kGradientDescent;
  throw ParameterError("unknown solver '" + name + "' (expected gn, adam or gd)");
}

PretrainOptimizer ParsePretrainOptimizer(const std::string& name) {
  if (name == "adam") return PretrainOptimizer::kAdam;
  if (name == "gn") return PretrainOptimizer::kGaussNewton;
  throw ParameterError("unknown pretraining optimizer '" + name + "'");
}

void MmsConfig::Validate() const {
  if (!(tau > 0.0)) throw ParameterError("tau must be positive");
  if (outer_steps < 1) throw ParameterError("outer_steps must be at least 1");
  switch (solver) {
    case SolverKind::kGaussNewton:
      gn.Validate();
      break;
    case SolverKind::kAdam:
      adam.Validate();
      break;
    case SolverKind::kGradientDescent:
      gd.Validate();
      break;
  }
}

PretrainResult PretrainFit(const MlpModel& initial, const PretrainConfig& cfg) {
  if (cfg.iters < 0) throw ParameterError("pretraining iterations must be nonnegative");
  const QuadraticRegressionEnergy energy(cfg.target);
  const GridPtr& grid = cfg.target.grid();

  PretrainResult out{initial, Norm(initial.Forward(grid) - cfg.target), 0};
  if (out.fit_error <= cfg.tolerance || cfg.iters == 0) return out;

  Vector w = initial.params();
  if (cfg.optimizer == PretrainOptimizer::kGaussNewton) {
    GnConfig gn;
    gn.cg.max_iters = std::max(100, 2 * initial.parameter_count());
    gn.cg.rel_tolerance = 1e-12;
    gn.line_search.max_step_norm = std::numeric_limits<double>::max();
    const SubproblemSpec spec = FitSpec(initial, energy);
    for (int k = 0; k < cfg.iters; ++k) {
      const GnStepResult step = GnStep(spec, gn, w);
      w = step.params;
      ++out.iters_run;
      const double fit = Norm(initial.WithParams(w).Forward(grid) - cfg.target);
      if (!std::isfinite(fit)) throw NumericalError("pretraining diverged");
      if (fit <= cfg.tolerance || !step.diag.accepted) break;
    }
  } else {
    AdamConfig adam;
    adam.learning_rate = cfg.lr;
    AdamOptimizer optimizer(adam, initial.parameter_count());
    const SubproblemSpec spec = FitSpec(initial, energy);
    for (int k = 0; k < cfg.iters; ++k) {
      const Vector grad = SubproblemGradient(spec, w);
      if (!grad.allFinite()) throw NumericalError("pretraining diverged");
      optimizer.Step(w, grad);
      ++out.iters_run;
      if (cfg.tolerance > 0.0 &&
          Norm(initial.WithParams(w).Forward(grid) - cfg.target) <= cfg.tolerance) {
        break;
      }
    }
  }
  out.model = initial.WithParams(w);
  out.fit_error = Norm(out.model.Forward(grid) - cfg.target);
  if (!std::isfinite(out.fit_error)) throw NumericalError("pretraining diverged");
  return out;
}

PretrainResult PretrainInitial(const MlpArchitecture& arch, const PretrainConfig& cfg,
                               std::uint64_t seed) {
  return PretrainFit(MlpModel::Initialize(arch, seed), cfg);
}

namespace {

void FillTheory(MmsRecord& rec, const MmsConfig& cfg, const EnergyFunctional& energy,
                const GridFunction& u, const MlpModel& model, const GridPtr& grid,
                double& lip_running_max) {
  ConstantsOptions options;
  options.lipschitz_pairs = cfg.theory.lipschitz_pairs;
  options.lipschitz_radius = cfg.theory.lipschitz_radius;
  options.seed = cfg.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(rec.step);
  options.lip_surrogate = lip_running_max;
  TheoryConstants c = ComputeConstants(cfg.tau, energy, u, model, grid, cfg.theory.epsilon,
                                       cfg.theory.delta, options);
  lip_running_max = c.lip_surrogate;

  rec.T_n = kNaN;
  rec.K_n = -1;
  try {
    if (cfg.theory.c_bar) rec.T_n = InnerHorizonT(*cfg.theory.c_bar, c).value;
    rec.K_n = InnerItersK(DefaultDbar(c.F_v, c.nu), 2.0 / (3.0 * c.mu), c).count;
  } catch (const PreconditionError&) {
    // eps-delta pair admits no finite threshold; leave the sentinels.
  }
  rec.theory = c;
}

}  // namespace

MmsRun RunMms(const MlpModel& initial, const MmsConfig& cfg, const EnergyFunctional& energy,
              const GridPtr& grid, const ExactTrajectory* reference) {
  cfg.Validate();
  if (reference != nullptr && reference->steps.size() < static_cast<std::size_t>(cfg.outer_steps) + 1) {
    throw InputError("reference trajectory is shorter than the requested run");
  }
  MmsRun run;
  MlpModel model = initial;
  if (cfg.pretrain) {
    run.pretrain = PretrainFit(initial, *cfg.pretrain);
    model = run.pretrain->model;
  }

  GridFunction u = model.Forward(grid);
  Matrix jac = model.Jacobian(grid);
  double s_min = MinSingularValue(jac);
  double lip_running_max = 0.0;

  MmsRecord first;
  first.step = 0;
  first.energy = energy.Value(u);
  first.objective_start = kNaN;
  first.objective_end = kNaN;
  first.tracking_error = reference ? Norm(u - reference->steps[0]) : kNaN;
  first.s_min = s_min;
  first.displacement_ratio = kNaN;
  first.inner_residual = kNaN;
  first.T_n = kNaN;
  first.K_n = -1;
  if (cfg.theory.enabled) FillTheory(first, cfg, energy, u, model, grid, lip_running_max);
  run.records.push_back(first);
  run.iterates.push_back(u);
  run.params.push_back(model.params());

  for (int n = 1; n <= cfg.outer_steps; ++n) {
    const SubproblemSpec spec{model, u, &energy, cfg.tau, grid};
    const auto start = std::chrono::steady_clock::now();
    SolveResult solved;
    try {
      switch (cfg.solver) {
        case SolverKind::kGaussNewton:
          solved = SolveSubproblemGn(spec, cfg.gn);
          break;
        case SolverKind::kAdam:
          solved = SolveSubproblemAdam(spec, cfg.adam);
          break;
        case SolverKind::kGradientDescent:
          solved = SolveSubproblemGd(spec, cfg.gd);
          break;
      }
    } catch (const Error& e) {
      run.failed = true;
      run.failure = "outer step " + std::to_string(n) + ": " + e.what();
      break;
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    MmsRecord rec;
    rec.step = n;
    rec.wall_time = elapsed;
    rec.objective_start = SubproblemObjective(spec, model.params());
    rec.objective_end = SubproblemObjective(spec, solved.params);
    rec.inner_steps = static_cast<int>(solved.trace.size());
    for (const auto& d : solved.trace) {
      rec.accepted_steps += d.accepted ? 1 : 0;
      rec.cg_iters += d.cg_iters;
      rec.line_search_evals += d.line_search_evals;
    }

    MlpModel next = model.WithParams(solved.params);
    GridFunction u_next = next.Forward(grid);
    if (!u_next.values().allFinite()) {
      run.failed = true;
      run.failure = "outer step " + std::to_string(n) + ": iterate is not finite";
      break;
    }
    rec.param_step_norm = (solved.params - model.params()).norm();
    rec.stalled = rec.param_step_norm == 0.0;
    rec.function_step_norm = Norm(u_next - u);
    rec.displacement_ratio = rec.function_step_norm > 0.0
                                 ? rec.param_step_norm * s_min / rec.function_step_norm
                                 : kNaN;
    rec.inner_residual =
        cfg.theory.enabled ? Norm(u_next - ExactProx(u, cfg.tau, energy)) : kNaN;

    jac = next.Jacobian(grid);
    s_min = MinSingularValue(jac);
    rec.s_min = s_min;
    rec.energy = energy.Value(u_next);
    rec.tracking_error = reference ? Norm(u_next - reference->steps[n]) : kNaN;
    rec.T_n = kNaN;
    rec.K_n = -1;
    if (cfg.theory.enabled) FillTheory(rec, cfg, energy, u_next, next, grid, lip_running_max);

    run.records.push_back(rec);
    run.iterates.push_back(u_next);
    run.params.push_back(solved.params);
    run.inner_traces.push_back(std::move(solved.trace));
    model = std::move(next);
    u = std::move(u_next);
  }
  run.final_model = model;
  return run;
}

}  // namespace nmms
