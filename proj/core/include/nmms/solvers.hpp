#pragma once

// Inner solvers for one minimizing-movement subproblem
//
//   J^n(w) = ||u_w - u^n||^2 / (2 tau) + F[u_w],
//
// where u^n (the anchor) is the previous outer iterate sampled on the grid.

#include <string>
#include <vector>

#include "nmms/error.hpp"
#include "nmms/hilbert.hpp"
#include "nmms/linalg.hpp"
#include "nmms/network.hpp"

namespace nmms {

struct GnConfig {
  int inner_steps = 5;
  /// Levenberg-Marquardt damping rho; 0 gives plain Gauss-Newton.
  double lm_damping = 0.0;
  CgConfig cg;
  LineSearchConfig line_search;

  void Validate() const;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int inner_iters = 500;

  void Validate() const;
};

struct GdConfig {
  double learning_rate = 1e-3;
  int inner_iters = 500;

  void Validate() const;
};

/// One subproblem. `tau` may be +infinity, which drops the proximal term
/// and turns the subproblem into plain minimization of F (used for
/// pretraining).
struct SubproblemSpec {
  MlpModel model;
  GridFunction anchor;
  const EnergyFunctional* energy = nullptr;
  double tau = 0.0;
  GridPtr grid;

  /// Builds a warm-started spec: anchor = model.Forward(grid).
  static SubproblemSpec WarmStart(const MlpModel& model, const EnergyFunctional& energy,
                                  double tau, const GridPtr& grid);

  /// Throws on tau <= 0, missing energy, or mismatched shapes.
  void Validate() const;
  /// max_i |anchor_i - u_w0(x_i)| for the spec's own model parameters.
  double WarmStartGap() const;
};

struct StepDiagnostics {
  int step = 0;
  double objective_before = 0.0;
  double objective_after = 0.0;
  double grad_norm = 0.0;
  int cg_iters = 0;
  double cg_residual = 0.0;
  CgStatus cg_status = CgStatus::kConverged;
  double accepted_step = 0.0;
  double direction_norm = 0.0;
  int line_search_evals = 0;
  bool accepted = true;
};

/// Inner-solver failure (NaN gradient, broken CG) with the diagnostics of
/// the step that failed.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, StepDiagnostics diag)
      : Error(what), diag_(diag) {}
  const StepDiagnostics& diagnostics() const noexcept { return diag_; }

 private:
  StepDiagnostics diag_;
};

struct SolveResult {
  Vector params;
  std::vector<StepDiagnostics> trace;
};

struct GnStepResult {
  Vector params;
  StepDiagnostics diag;
};

/// J^n(w) for an arbitrary parameter vector w.
double SubproblemObjective(const SubproblemSpec& spec, const Vector& w);

/// grad_w J^n(w) = J^T W ((u - u^n) / tau + grad F[u]).
Vector SubproblemGradient(const SubproblemSpec& spec, const Vector& w);

/// One damped Gauss-Newton / Levenberg-Marquardt step followed by the
/// monotone backtracking line search. The direction solves
///
///   ((1/tau + c) J^T W J + rho I) eta = -J^T W r,   r = (u - u^n)/tau + grad F[u],
///
/// matrix-free by CG, where W holds the relative weights N w_i (identity
/// for the empirical measure, so the 1/N factors cancel) and c is the
/// energy's Gauss-Newton curvature (1 for the quadratic energy). Throws
/// NumericalError if CG fails; a rejected line search is not an error and
/// returns w unchanged.
GnStepResult GnStep(const SubproblemSpec& spec, const GnConfig& cfg, const Vector& w);

/// Applies GnStep cfg.inner_steps times from the warm start.
SolveResult SolveSubproblemGn(const SubproblemSpec& spec, const GnConfig& cfg);

/// Bias-corrected Adam moments; one instance per optimization run.
class AdamOptimizer {
 public:
  AdamOptimizer(AdamConfig cfg, Eigen::Index dimension);

  /// In-place update of `params` from `grad`.
  void Step(Vector& params, const Vector& grad);
  int steps_taken() const { return t_; }

 private:
  AdamConfig cfg_;
  Vector m_;
  Vector v_;
  int t_ = 0;
};

SolveResult SolveSubproblemAdam(const SubproblemSpec& spec, const AdamConfig& cfg);

SolveResult SolveSubproblemGd(const SubproblemSpec& spec, const GdConfig& cfg);

/// Raw (un-line-searched) directions from dense minimum-norm least-squares
/// solves (extended precision, relative rank cutoff 1e-8), used to compare
/// the two preconditioner scalings:
///   scaled   = -((1 + 1/tau) J^T J)^{-1} J^T r
///   unscaled = -(J^T J)^{-1} J^T r
struct RawDirections {
  Vector scaled;
  Vector unscaled;
};
RawDirections GaussNewtonRawDirections(const SubproblemSpec& spec, const Vector& w);

}  // namespace nmms
