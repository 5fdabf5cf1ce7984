#include "nmms/reference.hpp"

#include <cmath>

#include "nmms/error.hpp"

namespace nmms {

GridFunction ExactMmsStep(const GridFunction& u, const GridFunction& f_star, double tau) {
  if (!(tau > 0.0)) throw ParameterError("tau must be positive");
  CheckCompatible(u, f_star);
  Vector values = (u.values() + tau * f_star.values()) / (1.0 + tau);
  return GridFunction(u.grid(), std::move(values), u.channels());
}

GridFunction ExactMmsClosed(const GridFunction& u0, const GridFunction& f_star, double tau,
                            int n) {
  if (!(tau > 0.0)) throw ParameterError("tau must be positive");
  if (n < 0) throw ParameterError("step index must be nonnegative");
  CheckCompatible(u0, f_star);
  if (n == 0) return u0;
  const double decay = std::exp(-static_cast<double>(n) * std::log1p(tau));
  Vector values = decay * u0.values() + (1.0 - decay) * f_star.values();
  return GridFunction(u0.grid(), std::move(values), u0.channels());
}

ExactTrajectory BuildExactTrajectory(const GridFunction& u0, const GridFunction& f_star,
                                     double tau, int steps) {
  if (steps < 0) throw ParameterError("step count must be nonnegative");
  ExactTrajectory out{{u0}, tau, f_star};
  out.steps.reserve(static_cast<std::size_t>(steps) + 1);
  for (int n = 0; n < steps; ++n) out.steps.push_back(ExactMmsStep(out.steps.back(), f_star, tau));
  return out;
}

}  // namespace nmms
