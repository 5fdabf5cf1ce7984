#include "nmms/solvers.hpp"

#include <cmath>
#include <limits>

#include "nmms/error.hpp"

namespace nmms {

void GnConfig::Validate() const {
  if (inner_steps < 1) throw ParameterError("Gauss-Newton needs inner_steps >= 1");
  if (!(lm_damping >= 0.0)) throw ParameterError("LM damping must be nonnegative");
  cg.Validate();
  line_search.Validate();
}

void AdamConfig::Validate() const {
  if (!(learning_rate > 0.0)) throw ParameterError("Adam learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ParameterError("Adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ParameterError("Adam eps must be positive");
  if (inner_iters < 0) throw ParameterError("Adam inner_iters must be nonnegative");
}

void GdConfig::Validate() const {
  if (!(learning_rate >= 0.0)) throw ParameterError("GD learning rate must be nonnegative");
  if (inner_iters < 0) throw ParameterError("GD inner_iters must be nonnegative");
}

SubproblemSpec SubproblemSpec::WarmStart(const MlpModel& model, const EnergyFunctional& energy,
                                         double tau, const GridPtr& grid) {
  return SubproblemSpec{model, model.Forward(grid), &energy, tau, grid};
}

void SubproblemSpec::Validate() const {
  if (!(tau > 0.0)) throw ParameterError("tau must be positive");
  if (energy == nullptr) throw InputError("subproblem has no energy");
  if (!grid) throw InputError("subproblem has no grid");
  if (anchor.channels() != model.arch().output_dim ||
      anchor.size() != grid->size() * anchor.channels() || !anchor.grid()->SameAs(*grid)) {
    throw DimensionError("subproblem anchor does not live on the subproblem grid");
  }
}

double SubproblemSpec::WarmStartGap() const {
  return (model.Forward(grid).values() - anchor.values()).cwiseAbs().maxCoeff();
}

namespace {

void CheckWarmStart(const SubproblemSpec& spec) {
  spec.Validate();
  const double scale = 1.0 + spec.anchor.values().cwiseAbs().maxCoeff();
  if (spec.WarmStartGap() > 1e-12 * scale) {
    throw InputError("subproblem is not warm-started: anchor differs from the model output");
  }
}

// (u - u^n) / tau + grad F[u]; the first term vanishes for tau = inf.
Vector Residual(const SubproblemSpec& spec, const GridFunction& u) {
  Vector r = spec.energy->Gradient(u).values();
  if (std::isfinite(spec.tau)) r += (u.values() - spec.anchor.values()) / spec.tau;
  return r;
}

double ObjectiveAt(const SubproblemSpec& spec, const GridFunction& u) {
  double prox = 0.0;
  if (std::isfinite(spec.tau)) {
    const double d = Norm(u - spec.anchor);
    prox = d * d / (2.0 * spec.tau);
  }
  return prox + spec.energy->Value(u);
}

// Multiplies each sample's entries by the given per-point weights.
Vector WeightRows(const Vector& v, const Vector& weights, int channels) {
  Vector out = v;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    for (int c = 0; c < channels; ++c) out[i * channels + c] *= weights[i];
  }
  return out;
}

struct ValueAndGradient {
  double value;
  Vector gradient;
};

ValueAndGradient Evaluate(const SubproblemSpec& spec, const Vector& w) {
  const MlpModel model = spec.model.WithParams(w);
  const GridFunction u = model.Forward(spec.grid);
  const int channels = u.channels();
  const Vector cotangent = WeightRows(Residual(spec, u), spec.grid->weights(), channels);
  return {ObjectiveAt(spec, u), model.Pullback(spec.grid, cotangent)};
}

constexpr long double kRawRankCutoff = 1e-8L;

double PrecondScale(const SubproblemSpec& spec) {
  const double inv_tau = std::isfinite(spec.tau) ? 1.0 / spec.tau : 0.0;
  return inv_tau + spec.energy->GaussNewtonCurvature();
}

}  // namespace

double SubproblemObjective(const SubproblemSpec& spec, const Vector& w) {
  return ObjectiveAt(spec, spec.model.WithParams(w).Forward(spec.grid));
}

Vector SubproblemGradient(const SubproblemSpec& spec, const Vector& w) {
  return Evaluate(spec, w).gradient;
}

GnStepResult GnStep(const SubproblemSpec& spec, const GnConfig& cfg, const Vector& w) {
  spec.Validate();
  cfg.Validate();
  const MlpModel model = spec.model.WithParams(w);
  const GridFunction u = model.Forward(spec.grid);
  const Matrix jac = model.Jacobian(spec.grid);
  const int channels = u.channels();
  const Vector& rel = spec.grid->relative_weights();

  const Vector weighted_residual = WeightRows(Residual(spec, u), rel, channels);
  const Vector rhs = -(jac.transpose() * weighted_residual);
  const double scale = PrecondScale(spec);
  const double damping = cfg.lm_damping;

  LinearOperator op = [&](const Vector& z) -> Vector {
    Vector jz = WeightRows(jac * z, rel, channels);
    Vector out = scale * (jac.transpose() * jz);
    if (damping > 0.0) out += damping * z;
    return out;
  };

  GnStepResult out;
  out.diag.objective_before = ObjectiveAt(spec, u);
  out.diag.grad_norm = rhs.norm() / static_cast<double>(spec.grid->size());

  CgResult cg;
  try {
    cg = CgSolve(op, rhs, cfg.cg);
  } catch (const NumericalError& e) {
    out.diag.cg_residual = e.residual();
    throw SolverError(std::string("Gauss-Newton linear solve failed: ") + e.what(), out.diag);
  }
  out.diag.cg_iters = cg.iters;
  out.diag.cg_residual = cg.residual_norm;
  out.diag.cg_status = cg.status;
  const Vector& direction = cg.solution;
  out.diag.direction_norm = direction.norm();

  const auto line = BacktrackingStep(
      [&](double t) { return SubproblemObjective(spec, w + t * direction); },
      out.diag.direction_norm, cfg.line_search);
  out.diag.line_search_evals = line.evals;
  out.diag.accepted = line.accepted;
  out.diag.accepted_step = line.step;
  out.diag.objective_after = line.value;
  out.params = line.accepted ? Vector(w + line.step * direction) : w;
  return out;
}

SolveResult SolveSubproblemGn(const SubproblemSpec& spec, const GnConfig& cfg) {
  CheckWarmStart(spec);
  cfg.Validate();
  SolveResult out;
  out.params = spec.model.params();
  out.trace.reserve(cfg.inner_steps);
  for (int k = 0; k < cfg.inner_steps; ++k) {
    GnStepResult step = GnStep(spec, cfg, out.params);
    step.diag.step = k;
    out.params = std::move(step.params);
    out.trace.push_back(step.diag);
  }
  return out;
}

AdamOptimizer::AdamOptimizer(AdamConfig cfg, Eigen::Index dimension)
    : cfg_(cfg), m_(Vector::Zero(dimension)), v_(Vector::Zero(dimension)) {
  cfg_.Validate();
}

void AdamOptimizer::Step(Vector& params, const Vector& grad) {
  if (grad.size() != params.size() || grad.size() != m_.size()) {
    throw DimensionError("Adam gradient has the wrong length");
  }
  ++t_;
  m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
  v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
  const Vector m_hat = m_ / c1;
  const Vector v_hat = v_ / c2;
  params.array() -= cfg_.learning_rate * m_hat.array() / (v_hat.array().sqrt() + cfg_.eps);
}

namespace {

template <typename Update>
SolveResult FirstOrderLoop(const SubproblemSpec& spec, int iters, Update&& update) {
  CheckWarmStart(spec);
  SolveResult out;
  out.params = spec.model.params();
  out.trace.reserve(iters);
  for (int k = 0; k < iters; ++k) {
    ValueAndGradient vg = Evaluate(spec, out.params);
    StepDiagnostics diag;
    diag.step = k;
    diag.objective_before = vg.value;
    diag.grad_norm = vg.gradient.norm();
    if (!vg.gradient.allFinite() || !std::isfinite(vg.value)) {
      diag.accepted = false;
      throw SolverError("first-order inner solver produced a non-finite gradient at step " +
                            std::to_string(k),
                        diag);
    }
    const Vector before = out.params;
    update(out.params, vg.gradient);
    diag.direction_norm = (out.params - before).norm();
    diag.accepted_step = 1.0;
    if (!out.trace.empty()) out.trace.back().objective_after = vg.value;
    out.trace.push_back(diag);
  }
  if (!out.trace.empty()) out.trace.back().objective_after = SubproblemObjective(spec, out.params);
  return out;
}

}  // namespace

SolveResult SolveSubproblemAdam(const SubproblemSpec& spec, const AdamConfig& cfg) {
  AdamOptimizer adam(cfg, spec.model.parameter_count());
  return FirstOrderLoop(spec, cfg.inner_iters,
                        [&](Vector& w, const Vector& g) { adam.Step(w, g); });
}

SolveResult SolveSubproblemGd(const SubproblemSpec& spec, const GdConfig& cfg) {
  cfg.Validate();
  return FirstOrderLoop(spec, cfg.inner_iters,
                        [&](Vector& w, const Vector& g) { w -= cfg.learning_rate * g; });
}

RawDirections GaussNewtonRawDirections(const SubproblemSpec& spec, const Vector& w) {
  spec.Validate();
  const MlpModel model = spec.model.WithParams(w);
  const GridFunction u = model.Forward(spec.grid);
  const Matrix jac = model.Jacobian(spec.grid);
  const Vector& rel = spec.grid->relative_weights();
  const int channels = u.channels();
  // Least-squares form of both normal equations: with A = W^{1/2} J and
  // b = W^{1/2} r, A^T A d = -A^T b. Small tanh nets on a 1D grid routinely
  // have cond(J) between 1e8 and 1e17, so (J^T J)^{-1} does not exist in
  // floating point. Both systems are solved for the minimum-norm solution on
  // the numerically resolvable subspace (complete orthogonal decomposition,
  // relative rank cutoff kRawRankCutoff) in extended precision. The cutoff is
  // relative, so A and sqrt(s) A get the same rank.
  using MatrixL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  using VectorL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  MatrixL a = jac.cast<long double>();
  VectorL b = Residual(spec, u).cast<long double>();
  for (Eigen::Index i = 0; i < rel.size(); ++i) {
    const long double s = std::sqrt(static_cast<long double>(rel[i]));
    for (int c = 0; c < channels; ++c) {
      a.row(i * channels + c) *= s;
      b[i * channels + c] *= s;
    }
  }
  const long double root = std::sqrt(static_cast<long double>(PrecondScale(spec)));
  auto min_norm = [](const MatrixL& m, const VectorL& rhs) {
    Eigen::CompleteOrthogonalDecomposition<MatrixL> cod;
    cod.setThreshold(kRawRankCutoff);
    cod.compute(m);
    return VectorL(cod.solve(rhs));
  };
  RawDirections out;
  out.unscaled = min_norm(a, -b).cast<double>();
  out.scaled = min_norm(root * a, -b / root).cast<double>();
  return out;
}

}  // namespace nmms
