#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nmms/hilbert.hpp"
#include "nmms/network.hpp"
#include "nmms/reference.hpp"
#include "nmms/solvers.hpp"
#include "nmms/theory.hpp"

namespace nmms {

enum class SolverKind { kGaussNewton, kAdam, kGradientDescent };
enum class PretrainOptimizer { kAdam, kGaussNewton };

std::string ToString(SolverKind kind);
SolverKind ParseSolverKind(const std::string& name);
PretrainOptimizer ParsePretrainOptimizer(const std::string& name);

struct PretrainConfig {
  GridFunction target;
  int iters = 2000;
  double lr = 1e-3;
  PretrainOptimizer optimizer = PretrainOptimizer::kAdam;
  /// Stop as soon as the fit error drops to this value.
  double tolerance = 0.0;
};

struct TheoryOptions {
  bool enabled = true;
  int lipschitz_pairs = 64;
  double lipschitz_radius = 1e-2;
  double epsilon = 0.0;
  double delta = 1e-2;
  /// Flow-gap constant for the continuous horizon; T_n is only reported
  /// when this is set.
  std::optional<double> c_bar;
};

struct MmsConfig {
  double tau = 0.1;
  int outer_steps = 30;
  SolverKind solver = SolverKind::kGaussNewton;
  GnConfig gn;
  AdamConfig adam;
  GdConfig gd;
  std::uint64_t seed = 0;
  std::optional<PretrainConfig> pretrain;
  TheoryOptions theory;

  void Validate() const;
};

/// Row n describes iterate u^n and, for n >= 1, the subproblem that
/// produced it from u^{n-1}. Row 0 is the initial state, so a run of
/// outer_steps steps has outer_steps + 1 rows.
struct MmsRecord {
  int step = 0;
  double energy = 0.0;                 // F[u^n]
  double objective_start = 0.0;        // J^{n-1}(w^{n-1}) = F[u^{n-1}]
  double objective_end = 0.0;          // J^{n-1}(w^n) = F[u^n] + |u^n - u^{n-1}|^2 / (2 tau)
  double tracking_error = 0.0;         // |u^n_NN - u^n_exact|; NaN without a reference
  double s_min = 0.0;                  // sigma_min(J(w^n)), unweighted
  double param_step_norm = 0.0;        // Delta_{n-1} = |w^n - w^{n-1}|
  double function_step_norm = 0.0;     // |u^n - u^{n-1}|
  double displacement_ratio = 0.0;     // Delta_{n-1} s_min(J(w^{n-1})) / |u^n - u^{n-1}|
  double inner_residual = 0.0;         // |u^n - J_tau(u^{n-1})|; NaN when theory is off
  int inner_steps = 0;
  int accepted_steps = 0;
  int cg_iters = 0;
  int line_search_evals = 0;
  bool stalled = false;
  double T_n = 0.0;                    // continuous horizon (NaN when unavailable)
  long long K_n = 0;                   // discrete inner count at eta = 2/(3 mu); -1 when unavailable
  std::optional<TheoryConstants> theory;
  double wall_time = 0.0;              // seconds spent in the inner solve
};

struct PretrainResult {
  MlpModel model;
  double fit_error = 0.0;
  int iters_run = 0;
};

/// Fits `initial` to `target` by minimizing 1/2 |u_NN - target|^2.
PretrainResult PretrainFit(const MlpModel& initial, const PretrainConfig& cfg);

/// Initializes from `arch` with `seed`, then calls PretrainFit.
PretrainResult PretrainInitial(const MlpArchitecture& arch, const PretrainConfig& cfg,
                               std::uint64_t seed);

struct MmsRun {
  std::vector<MmsRecord> records;
  std::vector<GridFunction> iterates;  // u^0_NN .. u^n_NN
  std::vector<Vector> params;          // w^0 .. w^n
  std::vector<std::vector<StepDiagnostics>> inner_traces;  // one per outer step
  std::optional<MlpModel> final_model;
  std::optional<PretrainResult> pretrain;
  bool failed = false;
  std::string failure;
};

/// Outer minimizing-movement loop with warm-started inner solves. Solver
/// failures end the run early with `failed` set and the records gathered so
/// far. When `reference` is given it must hold at least outer_steps + 1
/// iterates.
MmsRun RunMms(const MlpModel& initial, const MmsConfig& cfg, const EnergyFunctional& energy,
              const GridPtr& grid, const ExactTrajectory* reference = nullptr);

}  // namespace nmms
