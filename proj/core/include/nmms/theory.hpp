#pragma once

// Constants of the convergence theory for one iterate, the inner-solver
// thresholds derived from them, and post-hoc certificates over a recorded
// trajectory.
//
// Conventions. lambda is the non-degeneracy constant in Du^* Du >= 4 lambda^2 I,
// where Du is the Jacobian as an operator into the weighted grid space, i.e.
// the rows of J scaled by sqrt(w_i). Hence lambda_hat = s_min(W^{1/2} J) / 2.
// For the empirical measure W^{1/2} J = J / sqrt(N).

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "nmms/hilbert.hpp"
#include "nmms/network.hpp"

namespace nmms {

struct TheoryConstants {
  double tau = 0.0;
  double m_F = 0.0;
  double L_F = 0.0;
  double nu = 0.0;     // 1/tau + m_F
  double mu = 0.0;     // 1/tau + L_F
  double kappa = 0.0;  // mu / nu
  double rho = 0.0;    // 1 / (1 + tau m_F)

  double s_min_weighted = 0.0;  // s_min(W^{1/2} J)
  double lambda_hat = 0.0;      // s_min_weighted / 2
  double L_hat = 0.0;           // sampled Jacobian-Lipschitz estimate
  double jacobian_op_norm = 0.0;
  double lip_surrogate = 0.0;  // stands in for the global network Lipschitz constant
  double r_w = 0.0;
  double Lambda = 0.0;  // 2 L_hat / lambda_hat^2

  double F_v = 0.0;
  double K_v = 0.0;
  double h_star_norm = 0.0;
  double C_v = 0.0;
  bool degenerate = false;  // lambda_hat == 0

  double epsilon = 0.0;
  double delta = 0.0;
};

/// nu, mu, kappa, rho from (tau, m_F, L_F). Throws ParameterError for
/// tau <= 0, m_F < 0 or L_F < m_F.
TheoryConstants ScalarConstants(double tau, double m_F, double L_F);

/// K(v) = sqrt(2 tau F[v] / (1 + tau m_F)).
double SublevelRadius(double tau, double m_F, double energy_value);

/// C(v) = (4 L kappa / lambda^2) max{||h*||, K(v)}; +inf when lambda = 0.
double DataCondition(double lipschitz, double kappa, double lambda, double h_star_norm,
                     double sublevel_radius);

/// Non-degeneracy radius
///   min{ lambda/L,
///        lambda^2 / (2L (sqrt(|Du|^2 + lambda^2) + |Du|)),
///        lambda^2 (1 + tau m_F) / (4 L Lip (1 + tau L_F)) },
/// +inf when L = 0.
double NonDegeneracyRadius(double lambda, double lipschitz, double jacobian_op_norm,
                           double lip_surrogate, double tau, double m_F, double L_F);

struct ConstantsOptions {
  int lipschitz_pairs = 64;
  double lipschitz_radius = 1e-2;
  std::uint64_t seed = 0;
  /// Running max of ||Du||_op along a trajectory; the current value is used
  /// when absent or smaller.
  std::optional<double> lip_surrogate;
};

/// Full constant pack at v = u_NN(w) for the model's current parameters.
/// Requires tau > 0 and m_F > 0.
TheoryConstants ComputeConstants(double tau, const EnergyFunctional& energy,
                                 const GridFunction& v, const MlpModel& model,
                                 const GridPtr& grid, double epsilon, double delta,
                                 const ConstantsOptions& options = {});

struct ThresholdResult {
  double value = 0.0;
  /// The log argument was below 1 and the value was clamped to 0.
  bool clamped = false;
};

/// T = (2/nu) log(Cbar (1 + tau m_F) / (tau m_F (delta - eps) - eps)).
/// Throws PreconditionError unless eps < tau m_F delta / (1 + tau m_F).
ThresholdResult InnerHorizonT(double c_bar, const TheoryConstants& c);

struct IterationCount {
  long long count = 0;
  bool clamped = false;
  double q = 0.0;
};

/// ceil(log(argument) / log(1/q)), floored at 0.
IterationCount DiscreteIterationCount(double q, double log_argument);

/// K = ceil(log(Dbar (1 + tau m_F) / (tau m_F (delta - eps) - eps)) / log(1/q)),
/// q = sqrt(1 - nu eta / 2). Throws ParameterError unless 0 < eta <= 2/(3 mu)
/// and PreconditionError under the same eps-delta condition as InnerHorizonT.
IterationCount InnerItersK(double d_bar, double eta, const TheoryConstants& c);

/// sqrt(4 F[v] / nu), an upper bound on the flow-gap constant from F alone.
double DefaultDbar(double energy_value, double nu);

struct TrackingStep {
  int n = 0;
  double e_n = 0.0;
  double inner_residual = 0.0;  // ||u^{n+1}_NN - J_tau(u^n_NN)||
  double bound = 0.0;           // rho e_n + residual + eps
  double e_next = 0.0;
  bool pass = false;
};

struct GlobalStep {
  int n = 0;
  double distance_to_minimizer = 0.0;
  double bound = 0.0;  // sup_m e_m + rho^n ||u^0 - u*||
  bool pass = false;
};

struct TrackingCertificate {
  std::vector<double> errors;  // e_0 .. e_N
  std::vector<TrackingStep> steps;
  std::vector<GlobalStep> global;
  double sup_error = 0.0;
  bool recurrence_pass = true;
  bool global_pass = true;
  bool passed() const { return recurrence_pass && global_pass; }
};

/// Checks e_{n+1} <= rho e_n + ||u^{n+1}_NN - J_tau(u^n_NN)|| + eps at every
/// step with the observed inner residual, and the global bound
/// ||u^n_NN - u*|| <= sup_m e_m + rho^n ||u^0 - u*|| when the energy knows
/// its minimizer. Comparisons allow 1e-12 relative floating-point slack.
/// Throws InputError when the sequences differ in length or are empty.
TrackingCertificate CertifyTracking(const std::vector<GridFunction>& nn_iterates,
                                    const std::vector<GridFunction>& exact_iterates,
                                    const EnergyFunctional& energy, const TheoryConstants& c);

struct LambdaBudgetReport {
  std::vector<double> proxy;      // lambda_0 - (L/2) sum_{k<n} Delta_k
  std::vector<double> empirical;  // s_min(W^{1/2} J(w^n)) / 2 when provided
  std::optional<int> exhausted_at;
  /// Steps where the proxy exceeds the empirical value; L_hat is only an
  /// estimate, so these are reported rather than treated as failures.
  std::vector<int> violations;
};

/// `displacements` holds Delta_0 .. Delta_{n-1}; the proxy has one more
/// entry than displacements. `empirical_half_smin` is optional (may be empty).
LambdaBudgetReport LambdaBudget(const std::vector<double>& displacements, double lambda0,
                                double lipschitz,
                                const std::vector<double>& empirical_half_smin = {});

/// Largest tau with isolation radius >= 2 tau |grad F| / (1 + tau m_F);
/// +inf when the inequality holds for every tau.
double LocalityThreshold(double isolation_radius, double grad_norm, double m_F);

/// rho^n e0 + n eta0 rho^{n-1} + eps (1 - rho^n) / (1 - rho).
double GeometricTrackingBound(int n, double rho, double e0, double eta0, double eps);

}  // namespace nmms
