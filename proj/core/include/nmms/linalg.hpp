#pragma once

#include <functional>
#include <vector>

#include "nmms/hilbert.hpp"

namespace nmms {

struct CgConfig {
  int max_iters = 30;
  double rel_tolerance = 1e-8;

  void Validate() const;
};

enum class CgStatus {
  kConverged,
  kMaxIterations,
  /// p^T A p <= 0 met; the iterate reached so far is returned.
  kNegativeCurvature,
};

struct CgResult {
  Vector solution;
  double residual_norm = 0.0;
  int iters = 0;
  CgStatus status = CgStatus::kConverged;
  /// ||b - A x_k|| for k = 0..iters (recursively updated residuals).
  std::vector<double> residual_history;
};

using LinearOperator = std::function<Vector(const Vector&)>;

/// Plain (unpreconditioned) conjugate gradients from x0 = 0 on a symmetric
/// positive (semi)definite operator. Stops when ||A x - b|| <= tol * ||b||
/// or after max_iters iterations. Throws NumericalError on NaN/Inf.
CgResult CgSolve(const LinearOperator& op, const Vector& rhs, const CgConfig& cfg);

struct LineSearchConfig {
  double contraction = 0.5;
  int max_backtracks = 8;
  double max_step_norm = 5.0;
  double initial_step = 1.0;

  void Validate() const;
};

struct LineSearchResult {
  double step = 0.0;
  /// Number of trial evaluations, excluding the value at t = 0.
  int evals = 0;
  bool accepted = false;
  double value_at_zero = 0.0;
  /// Objective at the accepted step; value_at_zero on rejection.
  double value = 0.0;
};

/// Monotone backtracking along a fixed direction with a norm clip.
///
/// The first trial is t0 = min(initial_step, max_step_norm / direction_norm);
/// every failed trial multiplies t by `contraction`. At most max_backtracks
/// trial points are evaluated. A trial is accepted on strict decrease
/// objective(t) < objective(0); otherwise step = 0 and accepted = false.
LineSearchResult BacktrackingStep(const std::function<double(double)>& objective,
                                  double direction_norm, const LineSearchConfig& cfg);

/// Smallest eigenvalue of a symmetric matrix. Throws InputError when A is
/// not square or not symmetric within 1e-10 (relative to its largest entry).
double SmallestEigSym(const Matrix& a);

/// Largest singular value by power iteration on A^T A.
double OperatorNorm(const Matrix& a, int max_iters = 200, double rel_tolerance = 1e-12);

}  // namespace nmms
