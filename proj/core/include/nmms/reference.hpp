#pragma once

// Exact minimizing-movement trajectories for F[u] = 1/2 ||u - f*||^2, where
// every proximal step has the closed form (u + tau f*) / (1 + tau).

#include <vector>

#include "nmms/hilbert.hpp"

namespace nmms {

struct ExactTrajectory {
  std::vector<GridFunction> steps;  // u^0 .. u^n
  double tau = 0.0;
  GridFunction target;
};

/// (u + tau f*) / (1 + tau), elementwise.
GridFunction ExactMmsStep(const GridFunction& u, const GridFunction& f_star, double tau);

/// (1+tau)^{-n} u0 + (1 - (1+tau)^{-n}) f*. The decay factor is evaluated
/// as exp(-n log1p(tau)), which underflows to 0 instead of overflowing.
GridFunction ExactMmsClosed(const GridFunction& u0, const GridFunction& f_star, double tau,
                            int n);

/// u^0 .. u^steps built by the recursion.
ExactTrajectory BuildExactTrajectory(const GridFunction& u0, const GridFunction& f_star,
                                     double tau, int steps);

}  // namespace nmms
