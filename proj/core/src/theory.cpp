#include "nmms/theory.hpp"

#include <algorithm>
#include <cmath>

#include "nmms/error.hpp"
#include "nmms/linalg.hpp"

namespace nmms {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool WithinSlack(double lhs, double rhs) { return lhs <= rhs + 1e-12 * (1.0 + std::abs(rhs)); }

// tau m_F (delta - eps) - eps, which must be positive for either threshold.
double ThresholdDenominator(const TheoryConstants& c) {
  const double denom = c.tau * c.m_F * (c.delta - c.epsilon) - c.epsilon;
  if (!(denom > 0.0)) {
    throw PreconditionError(
        "target accuracy too small for the approximation error: need eps < tau m_F delta / "
        "(1 + tau m_F), got eps = " +
        std::to_string(c.epsilon) + ", delta = " + std::to_string(c.delta));
  }
  return denom;
}

}  // namespace

TheoryConstants ScalarConstants(double tau, double m_F, double L_F) {
  if (!(tau > 0.0)) throw ParameterError("tau must be positive");
  if (!(m_F >= 0.0)) throw ParameterError("m_F must be nonnegative");
  if (!(L_F >= m_F)) throw ParameterError("L_F must be at least m_F");
  TheoryConstants c;
  c.tau = tau;
  c.m_F = m_F;
  c.L_F = L_F;
  c.nu = 1.0 / tau + m_F;
  c.mu = 1.0 / tau + L_F;
  c.kappa = c.mu / c.nu;
  c.rho = 1.0 / (1.0 + tau * m_F);
  return c;
}

double SublevelRadius(double tau, double m_F, double energy_value) {
  return std::sqrt(2.0 * tau * energy_value / (1.0 + tau * m_F));
}

double DataCondition(double lipschitz, double kappa, double lambda, double h_star_norm,
                     double sublevel_radius) {
  if (!(lambda > 0.0)) return kInf;
  return 4.0 * lipschitz * kappa / (lambda * lambda) * std::max(h_star_norm, sublevel_radius);
}

double NonDegeneracyRadius(double lambda, double lipschitz, double jacobian_op_norm,
                           double lip_surrogate, double tau, double m_F, double L_F) {
  if (!(lambda > 0.0)) return 0.0;
  if (!(lipschitz > 0.0)) return kInf;
  const double l2 = lambda * lambda;
  const double first = lambda / lipschitz;
  const double second =
      l2 / (2.0 * lipschitz *
            (std::sqrt(jacobian_op_norm * jacobian_op_norm + l2) + jacobian_op_norm));
  const double third = lip_surrogate > 0.0 ? l2 * (1.0 + tau * m_F) /
                                                 (4.0 * lipschitz * lip_surrogate * (1.0 + tau * L_F))
                                           : kInf;
  return std::min({first, second, third});
}

TheoryConstants ComputeConstants(double tau, const EnergyFunctional& energy,
                                 const GridFunction& v, const MlpModel& model,
                                 const GridPtr& grid, double epsilon, double delta,
                                 const ConstantsOptions& options) {
  TheoryConstants c = ScalarConstants(tau, energy.StrongConvexity(), energy.GradientLipschitz());
  if (!(c.m_F > 0.0)) throw ParameterError("theory constants need m_F > 0");
  c.epsilon = epsilon;
  c.delta = delta;

  const int channels = model.arch().output_dim;
  const Matrix du = WeightedJacobian(model.Jacobian(grid), *grid, channels);
  c.s_min_weighted = MinSingularValue(du);
  c.lambda_hat = 0.5 * c.s_min_weighted;
  c.jacobian_op_norm = OperatorNorm(du);
  c.lip_surrogate = std::max(c.jacobian_op_norm, options.lip_surrogate.value_or(0.0));
  c.L_hat = EstimateJacobianLipschitz(model, grid, options.lipschitz_pairs,
                                      options.lipschitz_radius, options.seed)
                .value;

  c.degenerate = !(c.lambda_hat > 0.0);
  c.r_w = NonDegeneracyRadius(c.lambda_hat, c.L_hat, c.jacobian_op_norm, c.lip_surrogate, tau,
                              c.m_F, c.L_F);
  c.Lambda = c.degenerate ? kInf : 2.0 * c.L_hat / (c.lambda_hat * c.lambda_hat);

  c.F_v = energy.Value(v);
  c.K_v = SublevelRadius(tau, c.m_F, c.F_v);
  c.h_star_norm = Norm(ExactProx(v, tau, energy) - v);
  c.C_v = DataCondition(c.L_hat, c.kappa, c.lambda_hat, c.h_star_norm, c.K_v);
  return c;
}

ThresholdResult InnerHorizonT(double c_bar, const TheoryConstants& c) {
  const double denom = ThresholdDenominator(c);
  const double argument = c_bar * (1.0 + c.tau * c.m_F) / denom;
  ThresholdResult out;
  if (!(argument >= 1.0)) {
    out.clamped = true;
    return out;
  }
  out.value = (2.0 / c.nu) * std::log(argument);
  return out;
}

IterationCount DiscreteIterationCount(double q, double log_argument) {
  if (!(q > 0.0 && q < 1.0)) throw ParameterError("contraction factor q must lie in (0, 1)");
  IterationCount out;
  out.q = q;
  if (!(log_argument > 0.0)) {
    out.clamped = true;
    return out;
  }
  out.count = static_cast<long long>(std::ceil(log_argument / std::log(1.0 / q)));
  return out;
}

IterationCount InnerItersK(double d_bar, double eta, const TheoryConstants& c) {
  if (!(eta > 0.0 && eta <= 2.0 / (3.0 * c.mu))) {
    throw ParameterError("inner step size must satisfy 0 < eta <= 2/(3 mu)");
  }
  const double denom = ThresholdDenominator(c);
  const double q = std::sqrt(1.0 - c.nu * eta / 2.0);
  const double argument = d_bar * (1.0 + c.tau * c.m_F) / denom;
  return DiscreteIterationCount(q, argument > 0.0 ? std::log(argument) : -kInf);
}

double DefaultDbar(double energy_value, double nu) { return std::sqrt(4.0 * energy_value / nu); }

TrackingCertificate CertifyTracking(const std::vector<GridFunction>& nn_iterates,
                                    const std::vector<GridFunction>& exact_iterates,
                                    const EnergyFunctional& energy, const TheoryConstants& c) {
  if (nn_iterates.empty() || nn_iterates.size() != exact_iterates.size()) {
    throw InputError("tracking certificate needs equally long, nonempty trajectories (got " +
                     std::to_string(nn_iterates.size()) + " and " +
                     std::to_string(exact_iterates.size()) + ")");
  }
  TrackingCertificate cert;
  const std::size_t count = nn_iterates.size();
  cert.errors.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    cert.errors.push_back(Norm(nn_iterates[n] - exact_iterates[n]));
  }
  cert.sup_error = *std::max_element(cert.errors.begin(), cert.errors.end());

  for (std::size_t n = 0; n + 1 < count; ++n) {
    TrackingStep step;
    step.n = static_cast<int>(n);
    step.e_n = cert.errors[n];
    step.e_next = cert.errors[n + 1];
    step.inner_residual = Norm(nn_iterates[n + 1] - ExactProx(nn_iterates[n], c.tau, energy));
    step.bound = c.rho * step.e_n + step.inner_residual + c.epsilon;
    step.pass = WithinSlack(step.e_next, step.bound);
    cert.recurrence_pass = cert.recurrence_pass && step.pass;
    cert.steps.push_back(step);
  }

  if (const auto minimizer = energy.Minimizer()) {
    const double initial_gap = Norm(exact_iterates.front() - *minimizer);
    for (std::size_t n = 0; n < count; ++n) {
      GlobalStep g;
      g.n = static_cast<int>(n);
      g.distance_to_minimizer = Norm(nn_iterates[n] - *minimizer);
      g.bound = cert.sup_error + std::pow(c.rho, static_cast<double>(n)) * initial_gap;
      g.pass = WithinSlack(g.distance_to_minimizer, g.bound);
      cert.global_pass = cert.global_pass && g.pass;
      cert.global.push_back(g);
    }
  }
  return cert;
}

LambdaBudgetReport LambdaBudget(const std::vector<double>& displacements, double lambda0,
                                double lipschitz,
                                const std::vector<double>& empirical_half_smin) {
  LambdaBudgetReport out;
  out.empirical = empirical_half_smin;
  double lambda = lambda0;
  double travelled = 0.0;
  for (std::size_t n = 0; n <= displacements.size(); ++n) {
    if (n > 0) travelled += displacements[n - 1];
    lambda = lambda0 - 0.5 * lipschitz * travelled;
    out.proxy.push_back(lambda);
    if (!out.exhausted_at && !(lambda > 0.0)) out.exhausted_at = static_cast<int>(n);
    if (n < empirical_half_smin.size() && lambda > 0.0 &&
        !WithinSlack(lambda, empirical_half_smin[n])) {
      out.violations.push_back(static_cast<int>(n));
    }
  }
  return out;
}

double LocalityThreshold(double isolation_radius, double grad_norm, double m_F) {
  if (isolation_radius < 0.0 || grad_norm < 0.0 || m_F < 0.0) {
    throw ParameterError("locality threshold inputs must be nonnegative");
  }
  const double slope = 2.0 * grad_norm - isolation_radius * m_F;
  if (!(slope > 0.0)) return kInf;
  return isolation_radius / slope;
}

double GeometricTrackingBound(int n, double rho, double e0, double eta0, double eps) {
  const double rn = std::pow(rho, n);
  const double drift = n == 0 ? 0.0 : n * eta0 * std::pow(rho, n - 1);
  const double approx = rho < 1.0 ? eps * (1.0 - rn) / (1.0 - rho) : eps * n;
  return rn * e0 + drift + approx;
}

}  // namespace nmms
