#include "nmms/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nmms/error.hpp"

namespace nmms {

void CgConfig::Validate() const {
  if (max_iters < 1) throw ParameterError("CG needs max_iters >= 1");
  if (!(rel_tolerance > 0.0)) throw ParameterError("CG tolerance must be positive");
}

CgResult CgSolve(const LinearOperator& op, const Vector& rhs, const CgConfig& cfg) {
  cfg.Validate();
  if (!rhs.allFinite()) throw NumericalError("CG right-hand side is not finite");

  CgResult out;
  out.solution = Vector::Zero(rhs.size());
  Vector r = rhs;
  Vector p = r;
  double rr = r.squaredNorm();
  const double target = cfg.rel_tolerance * std::sqrt(rr);
  out.residual_norm = std::sqrt(rr);
  out.residual_history.push_back(out.residual_norm);

  if (out.residual_norm <= target || out.residual_norm == 0.0) {
    out.status = CgStatus::kConverged;
    return out;
  }

  out.status = CgStatus::kMaxIterations;
  for (int k = 0; k < cfg.max_iters; ++k) {
    const Vector ap = op(p);
    const double curvature = p.dot(ap);
    if (!std::isfinite(curvature) || !ap.allFinite()) {
      throw NumericalError("CG operator produced a non-finite value", out.residual_norm);
    }
    if (curvature <= 0.0) {
      out.status = CgStatus::kNegativeCurvature;
      break;
    }
    const double alpha = rr / curvature;
    out.solution += alpha * p;
    r -= alpha * ap;
    const double rr_next = r.squaredNorm();
    ++out.iters;
    out.residual_norm = std::sqrt(rr_next);
    out.residual_history.push_back(out.residual_norm);
    if (!std::isfinite(out.residual_norm)) {
      throw NumericalError("CG residual is not finite", out.residual_norm);
    }
    if (out.residual_norm <= target) {
      out.status = CgStatus::kConverged;
      break;
    }
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  return out;
}

void LineSearchConfig::Validate() const {
  if (!(contraction > 0.0 && contraction < 1.0)) {
    throw ParameterError("line-search contraction must lie in (0, 1)");
  }
  if (max_backtracks < 1) throw ParameterError("line search needs max_backtracks >= 1");
  if (!(max_step_norm > 0.0)) throw ParameterError("max step norm must be positive");
  if (!(initial_step > 0.0)) throw ParameterError("initial step must be positive");
}

LineSearchResult BacktrackingStep(const std::function<double(double)>& objective,
                                  double direction_norm, const LineSearchConfig& cfg) {
  cfg.Validate();
  LineSearchResult out;
  out.value_at_zero = objective(0.0);
  out.value = out.value_at_zero;
  if (!std::isfinite(out.value_at_zero)) {
    throw InputError("line-search objective is not finite at t = 0");
  }
  if (!(direction_norm > 0.0)) return out;

  double t = std::min(cfg.initial_step, cfg.max_step_norm / direction_norm);
  for (int k = 0; k < cfg.max_backtracks; ++k, t *= cfg.contraction) {
    const double value = objective(t);
    ++out.evals;
    if (value < out.value_at_zero) {
      out.step = t;
      out.value = value;
      out.accepted = true;
      return out;
    }
  }
  return out;
}

double SmallestEigSym(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw InputError("smallest eigenvalue needs a nonempty square matrix");
  }
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw InputError("matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("symmetric eigensolver failed");
  }
  return solver.eigenvalues()(0);
}

double OperatorNorm(const Matrix& a, int max_iters, double rel_tolerance) {
  if (a.size() == 0) return 0.0;
  // Deterministic start with every component nonzero.
  Vector x = Vector::LinSpaced(a.cols(), 1.0, 2.0);
  x.normalize();
  double sigma = 0.0;
  for (int k = 0; k < max_iters; ++k) {
    Vector y = a.transpose() * (a * x);
    const double norm = y.norm();
    if (norm == 0.0) return 0.0;
    const double next = std::sqrt(norm);
    x = y / norm;
    if (std::abs(next - sigma) <= rel_tolerance * next) {
      sigma = next;
      break;
    }
    sigma = next;
  }
  return sigma;
}

}  // namespace nmms
