#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nmms/hilbert.hpp"

namespace nmms {

enum class Activation { kTanh };
enum class InitScheme { kXavierNormalZeroBias, kSmallUniform, kZeros };

std::string ToString(Activation a);
std::string ToString(InitScheme s);
Activation ParseActivation(const std::string& name);
InitScheme ParseInitScheme(const std::string& name);

/// Fully connected network: tanh hidden layers followed by an affine output
/// layer. With no hidden layers the model is affine in its input, i.e.
/// linear in parameters with features (x, 1).
struct MlpArchitecture {
  int input_dim = 1;
  std::vector<int> hidden_widths;
  int output_dim = 1;
  Activation activation = Activation::kTanh;
  InitScheme init = InitScheme::kXavierNormalZeroBias;

  /// sum over layers of (fan_in + 1) * fan_out.
  int ParameterCount() const;
  /// Layer widths including input and output: d, h_1, ..., h_k, C.
  std::vector<int> LayerSizes() const;
  void Validate() const;
};

/// Parameters are flattened layer by layer; each layer stores its weight
/// matrix (fan_out x fan_in, row-major) followed by its bias vector.
class MlpModel {
 public:
  MlpModel(MlpArchitecture arch, Vector params);

  /// Draws parameters from `arch.init` with a seeded generator.
  static MlpModel Initialize(const MlpArchitecture& arch, std::uint64_t seed);

  const MlpArchitecture& arch() const { return arch_; }
  const Vector& params() const { return params_; }
  int parameter_count() const { return static_cast<int>(params_.size()); }

  /// Same architecture, new parameter vector.
  MlpModel WithParams(Vector params) const;

  GridFunction Forward(const GridPtr& grid) const;

  /// N*C x p matrix with row (i*C + c) = d u_c(x_i) / d w.
  Matrix Jacobian(const GridPtr& grid) const;

  /// J^T y without forming J (reverse mode over the whole batch).
  Vector Pullback(const GridPtr& grid, const Vector& cotangent) const;

 private:
  void CheckGrid(const SampleGrid& grid) const;

  MlpArchitecture arch_;
  Vector params_;
};

/// sigma_min(J) with the convention lambda_min(J^T J) = s_min^2, so the
/// result is 0 whenever J has more columns than rows.
double MinSingularValue(const Matrix& jacobian);

/// Rows of J scaled by sqrt(w_i), i.e. the matrix of Du in the grid's
/// weighted inner product.
Matrix WeightedJacobian(const Matrix& jacobian, const SampleGrid& grid, int channels = 1);

struct LipschitzEstimate {
  double value = 0.0;
  int pairs = 0;
};

/// max over random pairs w1, w2 in a ball of `radius` around the model's
/// parameters of ||D(w1) - D(w2)||_op / ||w1 - w2||, with D the weighted
/// Jacobian. A sampled lower estimate of the true constant, never a bound.
LipschitzEstimate EstimateJacobianLipschitz(const MlpModel& model, const GridPtr& grid,
                                            int pairs, double radius, std::uint64_t seed);

}  // namespace nmms
