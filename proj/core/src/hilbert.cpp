#include "nmms/hilbert.hpp"

#include <cmath>
#include <string>

#include "nmms/error.hpp"

namespace nmms {

SampleGrid::SampleGrid(Matrix points, Vector weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
  if (points_.rows() == 0 || points_.cols() == 0) {
    throw InputError("sample grid needs at least one point of positive dimension");
  }
  if (weights_.size() != points_.rows()) {
    throw InputError("sample grid has " + std::to_string(points_.rows()) + " points but " +
                     std::to_string(weights_.size()) + " weights");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < weights_.size(); ++i) {
    if (!(weights_[i] >= 0.0) || !std::isfinite(weights_[i])) {
      throw InputError("sample grid weights must be finite and nonnegative");
    }
    total += weights_[i];
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw InputError("sample grid weights must sum to 1");
  }
  // Equal weights map to exact ones: 1/N summed N times need not round back to N.
  if ((weights_.array() == weights_[0]).all()) {
    relative_weights_ = Vector::Ones(weights_.size());
  } else {
    relative_weights_ = weights_ * static_cast<double>(points_.rows());
  }
}

std::shared_ptr<const SampleGrid> SampleGrid::Uniform(Matrix points) {
  const auto n = points.rows();
  Vector weights = Vector::Constant(n, n > 0 ? 1.0 / static_cast<double>(n) : 0.0);
  return std::make_shared<SampleGrid>(std::move(points), std::move(weights));
}

std::shared_ptr<const SampleGrid> SampleGrid::Create(Matrix points, Vector weights) {
  return std::make_shared<SampleGrid>(std::move(points), std::move(weights));
}

std::shared_ptr<const SampleGrid> SampleGrid::Linspace(double lo, double hi, int count) {
  if (count < 1) throw ParameterError("linspace needs at least one point");
  Matrix points(count, 1);
  for (int i = 0; i < count; ++i) {
    points(i, 0) = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (count - 1);
  }
  return Uniform(std::move(points));
}

bool SampleGrid::SameAs(const SampleGrid& other) const {
  if (this == &other) return true;
  return points_.rows() == other.points_.rows() && points_.cols() == other.points_.cols() &&
         points_ == other.points_ && weights_ == other.weights_;
}

GridFunction::GridFunction(GridPtr grid, Vector values, int channels)
    : grid_(std::move(grid)), values_(std::move(values)), channels_(channels) {
  if (!grid_) throw InputError("grid function needs a grid");
  if (channels_ < 1) throw InputError("grid function needs at least one channel");
  if (values_.size() != static_cast<Eigen::Index>(grid_->size()) * channels_) {
    throw DimensionError("grid function has " + std::to_string(values_.size()) +
                         " values for a grid of " + std::to_string(grid_->size()) +
                         " points and " + std::to_string(channels_) + " channel(s)");
  }
}

GridFunction GridFunction::Zeros(GridPtr grid, int channels) {
  return Constant(std::move(grid), 0.0, channels);
}

GridFunction GridFunction::Constant(GridPtr grid, double value, int channels) {
  const auto n = static_cast<Eigen::Index>(grid->size()) * channels;
  return GridFunction(std::move(grid), Vector::Constant(n, value), channels);
}

void CheckCompatible(const GridFunction& u, const GridFunction& v) {
  if (u.channels() != v.channels() || u.size() != v.size() || !u.grid()->SameAs(*v.grid())) {
    throw DimensionError("grid functions are defined on different grids");
  }
}

GridFunction& GridFunction::operator+=(const GridFunction& other) {
  CheckCompatible(*this, other);
  values_ += other.values_;
  return *this;
}

GridFunction& GridFunction::operator-=(const GridFunction& other) {
  CheckCompatible(*this, other);
  values_ -= other.values_;
  return *this;
}

GridFunction& GridFunction::operator*=(double s) {
  values_ *= s;
  return *this;
}

GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
GridFunction operator*(double s, GridFunction a) { return a *= s; }

double Inner(const GridFunction& u, const GridFunction& v) {
  CheckCompatible(u, v);
  const Vector& w = u.grid()->weights();
  const int channels = u.channels();
  const Vector& a = u.values();
  const Vector& b = v.values();
  double total = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    double point = 0.0;
    for (int c = 0; c < channels; ++c) point += a[i * channels + c] * b[i * channels + c];
    total += w[i] * point;
  }
  return total;
}

double Norm(const GridFunction& u) { return std::sqrt(Inner(u, u)); }

std::optional<GridFunction> EnergyFunctional::ClosedFormProx(const GridFunction&, double) const {
  return std::nullopt;
}

QuadraticRegressionEnergy::QuadraticRegressionEnergy(GridFunction target)
    : target_(std::move(target)) {}

double QuadraticRegressionEnergy::Value(const GridFunction& u) const {
  const double r = Norm(u - target_);
  return 0.5 * r * r;
}

GridFunction QuadraticRegressionEnergy::Gradient(const GridFunction& u) const {
  return u - target_;
}

std::optional<GridFunction> QuadraticRegressionEnergy::ClosedFormProx(const GridFunction& v,
                                                                      double tau) const {
  CheckCompatible(v, target_);
  // v + tau (f* - v) / (1 + tau): same map as (v + tau f*) / (1 + tau), but
  // exactly v when v is already the minimizer.
  Vector values = v.values() + (tau / (1.0 + tau)) * (target_.values() - v.values());
  return GridFunction(v.grid(), std::move(values), v.channels());
}

double IncrementObjective(const GridFunction& h, const GridFunction& v, double tau,
                          const EnergyFunctional& energy) {
  if (!(tau > 0.0)) throw ParameterError("tau must be positive");
  const double hn = Norm(h);
  return hn * hn / (2.0 * tau) + energy.Value(v + h);
}

namespace {

// G(h) = h / tau + grad F[v + h].
GridFunction ProxResidual(const GridFunction& h, const GridFunction& v, double tau,
                          const EnergyFunctional& energy) {
  GridFunction g = energy.Gradient(v + h);
  g.mutable_values() += h.values() / tau;
  return g;
}

}  // namespace

GridFunction NewtonProx(const GridFunction& v, double tau, const EnergyFunctional& energy,
                        const NewtonProxOptions& options) {
  if (!(tau > 0.0)) throw ParameterError("tau must be positive");
  const auto n = static_cast<Eigen::Index>(v.size());
  GridFunction h = GridFunction::Zeros(v.grid(), v.channels());
  GridFunction residual = ProxResidual(h, v, tau, energy);
  double residual_norm = Norm(residual);

  Matrix jac(n, n);
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    if (residual_norm <= options.residual_tolerance) return v + h;
    if (!std::isfinite(residual_norm)) {
      throw NumericalError("Newton prox diverged", residual_norm);
    }

    for (Eigen::Index j = 0; j < n; ++j) {
      const double step = options.fd_step * (1.0 + std::abs(h.values()[j]));
      GridFunction plus = h;
      GridFunction minus = h;
      plus.mutable_values()[j] += step;
      minus.mutable_values()[j] -= step;
      jac.col(j) = (ProxResidual(plus, v, tau, energy).values() -
                    ProxResidual(minus, v, tau, energy).values()) /
                   (2.0 * step);
    }
    const Vector direction = jac.partialPivLu().solve(-residual.values());

    // Backtrack on the residual norm.
    double t = 1.0;
    bool improved = false;
    for (int k = 0; k < 40; ++k, t *= 0.5) {
      GridFunction trial(h.grid(), h.values() + t * direction, h.channels());
      GridFunction trial_residual = ProxResidual(trial, v, tau, energy);
      const double trial_norm = Norm(trial_residual);
      if (trial_norm < residual_norm) {
        h = std::move(trial);
        residual = std::move(trial_residual);
        residual_norm = trial_norm;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  if (residual_norm <= options.residual_tolerance) return v + h;
  throw NumericalError("Newton prox did not reach residual tolerance; residual " +
                           std::to_string(residual_norm),
                       residual_norm);
}

GridFunction ExactProx(const GridFunction& v, double tau, const EnergyFunctional& energy) {
  if (!(tau > 0.0)) throw ParameterError("tau must be positive");
  if (!(energy.StrongConvexity() > 0.0)) {
    throw ParameterError("exact prox requires a strongly convex energy (m_F > 0)");
  }
  if (auto closed = energy.ClosedFormProx(v, tau)) return *std::move(closed);
  return NewtonProx(v, tau, energy);
}

}  // namespace nmms
