#pragma once

// Discrete Hilbert space: functions sampled on a weighted point cloud.
//
// Every reduction in this header runs sequentially in increasing sample
// index, so inner products and norms are bit-reproducible for a given grid.

#include <memory>
#include <optional>

#include <Eigen/Dense>

namespace nmms {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Sample points x_1..x_N in R^d with nonnegative weights summing to one.
class SampleGrid {
 public:
  /// `points` is N x d, one row per point. Throws InputError when the
  /// weights are negative, have the wrong length or do not sum to 1.
  SampleGrid(Matrix points, Vector weights);

  /// Empirical measure: every weight equals 1/N.
  static std::shared_ptr<const SampleGrid> Uniform(Matrix points);
  static std::shared_ptr<const SampleGrid> Create(Matrix points, Vector weights);

  /// N uniformly spaced points on [lo, hi] (endpoints included).
  static std::shared_ptr<const SampleGrid> Linspace(double lo, double hi, int count);

  int size() const { return static_cast<int>(points_.rows()); }
  int dim() const { return static_cast<int>(points_.cols()); }
  const Matrix& points() const { return points_; }
  const Vector& weights() const { return weights_; }
  /// N * w_i; all ones for the empirical measure.
  const Vector& relative_weights() const { return relative_weights_; }

  bool SameAs(const SampleGrid& other) const;

 private:
  Matrix points_;
  Vector weights_;
  Vector relative_weights_;
};

using GridPtr = std::shared_ptr<const SampleGrid>;

/// Values of a (possibly vector-valued) function at every grid point.
///
/// Channel-valued functions store C values per point, sample-major: the
/// value of channel c at point i sits at index i * C + c.
class GridFunction {
 public:
  GridFunction(GridPtr grid, Vector values, int channels = 1);

  static GridFunction Zeros(GridPtr grid, int channels = 1);
  static GridFunction Constant(GridPtr grid, double value, int channels = 1);

  const GridPtr& grid() const { return grid_; }
  const Vector& values() const { return values_; }
  Vector& mutable_values() { return values_; }
  int channels() const { return channels_; }
  int size() const { return static_cast<int>(values_.size()); }
  double operator[](int i) const { return values_[i]; }

  GridFunction& operator+=(const GridFunction& other);
  GridFunction& operator-=(const GridFunction& other);
  GridFunction& operator*=(double s);

 private:
  GridPtr grid_;
  Vector values_;
  int channels_;
};

GridFunction operator+(GridFunction a, const GridFunction& b);
GridFunction operator-(GridFunction a, const GridFunction& b);
GridFunction operator*(double s, GridFunction a);

/// Throws DimensionError unless u and v share grid and channel layout.
void CheckCompatible(const GridFunction& u, const GridFunction& v);

/// sum_i w_i sum_c u_ic v_ic.
double Inner(const GridFunction& u, const GridFunction& v);
double Norm(const GridFunction& u);

/// Energy functional on the discrete space. Gradients are Riesz
/// representatives with respect to Inner().
class EnergyFunctional {
 public:
  virtual ~EnergyFunctional() = default;

  virtual double Value(const GridFunction& u) const = 0;
  virtual GridFunction Gradient(const GridFunction& u) const = 0;

  /// Strong-convexity modulus m_F.
  virtual double StrongConvexity() const = 0;
  /// Gradient Lipschitz constant L_F >= m_F.
  virtual double GradientLipschitz() const = 0;

  /// Closed-form proximal map if one is known.
  virtual std::optional<GridFunction> ClosedFormProx(const GridFunction& v, double tau) const;

  /// Global minimizer u* if known in closed form.
  virtual std::optional<GridFunction> Minimizer() const { return std::nullopt; }

  /// Scalar curvature used by the Gauss-Newton preconditioner. Equals the
  /// exact Hessian scale for least-squares energies.
  virtual double GaussNewtonCurvature() const { return GradientLipschitz(); }
};

/// F[u] = 1/2 ||u - f*||^2 with m_F = L_F = 1.
class QuadraticRegressionEnergy final : public EnergyFunctional {
 public:
  explicit QuadraticRegressionEnergy(GridFunction target);

  double Value(const GridFunction& u) const override;
  GridFunction Gradient(const GridFunction& u) const override;
  double StrongConvexity() const override { return 1.0; }
  double GradientLipschitz() const override { return 1.0; }
  std::optional<GridFunction> ClosedFormProx(const GridFunction& v, double tau) const override;
  std::optional<GridFunction> Minimizer() const override { return target_; }
  double GaussNewtonCurvature() const override { return 1.0; }

  const GridFunction& target() const { return target_; }

 private:
  GridFunction target_;
};

/// ||h||^2 / (2 tau) + F[v + h]; equals F[v] at h = 0.
double IncrementObjective(const GridFunction& h, const GridFunction& v, double tau,
                          const EnergyFunctional& energy);

struct NewtonProxOptions {
  double residual_tolerance = 1e-12;
  int max_iterations = 100;
  double fd_step = 1e-6;
};

/// Damped Newton on h / tau + grad F[v + h] = 0, returning v + h. The
/// Jacobian of the gradient is built by central differences, so only
/// values and gradients of F are required. Throws NumericalError with the
/// final residual when the iteration cap is hit.
GridFunction NewtonProx(const GridFunction& v, double tau, const EnergyFunctional& energy,
                        const NewtonProxOptions& options = {});

/// argmin_u ||u - v||^2 / (2 tau) + F[u]. Uses the energy's closed form when
/// available and NewtonProx otherwise. Requires tau > 0 and m_F > 0.
GridFunction ExactProx(const GridFunction& v, double tau, const EnergyFunctional& energy);

}  // namespace nmms
