#include "nmms/network.hpp"

#include <cmath>
#include <random>

#include "nmms/error.hpp"
#include "nmms/linalg.hpp"

namespace nmms {

std::string ToString(Activation) { return "tanh"; }

std::string ToString(InitScheme s) {
  switch (s) {
    case InitScheme::kXavierNormalZeroBias:
      return "xavier_normal_zero_bias";
    case InitScheme::kSmallUniform:
      return "small_uniform";
    case InitScheme::kZeros:
      return "zeros";
  }
  return "unknown";
}

Activation ParseActivation(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  throw ParameterError("unsupported activation '" + name + "' (only tanh is smooth enough)");
}

InitScheme ParseInitScheme(const std::string& name) {
  if (name == "xavier_normal_zero_bias") return InitScheme::kXavierNormalZeroBias;
  if (name == "small_uniform") return InitScheme::kSmallUniform;
  if (name == "zeros") return InitScheme::kZeros;
  throw ParameterError("unknown init scheme '" + name + "'");
}

std::vector<int> MlpArchitecture::LayerSizes() const {
  std::vector<int> sizes;
  sizes.reserve(hidden_widths.size() + 2);
  sizes.push_back(input_dim);
  sizes.insert(sizes.end(), hidden_widths.begin(), hidden_widths.end());
  sizes.push_back(output_dim);
  return sizes;
}

int MlpArchitecture::ParameterCount() const {
  const auto sizes = LayerSizes();
  int count = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) count += (sizes[l] + 1) * sizes[l + 1];
  return count;
}

void MlpArchitecture::Validate() const {
  if (input_dim < 1 || output_dim < 1) throw ParameterError("layer widths must be positive");
  for (int w : hidden_widths) {
    if (w < 1) throw ParameterError("hidden widths must be positive");
  }
}

MlpModel::MlpModel(MlpArchitecture arch, Vector params)
    : arch_(std::move(arch)), params_(std::move(params)) {
  arch_.Validate();
  if (params_.size() != arch_.ParameterCount()) {
    throw DimensionError("architecture has " + std::to_string(arch_.ParameterCount()) +
                         " parameters but the vector has " + std::to_string(params_.size()));
  }
}

MlpModel MlpModel::Initialize(const MlpArchitecture& arch, std::uint64_t seed) {
  arch.Validate();
  std::mt19937_64 rng(seed);
  Vector params = Vector::Zero(arch.ParameterCount());
  const auto sizes = arch.LayerSizes();
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l];
    const int fan_out = sizes[l + 1];
    const Eigen::Index n_weights = static_cast<Eigen::Index>(fan_in) * fan_out;
    switch (arch.init) {
      case InitScheme::kXavierNormalZeroBias: {
        const double gain = 5.0 / 3.0;  // tanh
        std::normal_distribution<double> dist(0.0, gain * std::sqrt(2.0 / (fan_in + fan_out)));
        for (Eigen::Index k = 0; k < n_weights; ++k) params[offset + k] = dist(rng);
        break;
      }
      case InitScheme::kSmallUniform: {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (Eigen::Index k = 0; k < n_weights + fan_out; ++k) params[offset + k] = dist(rng);
        break;
      }
      case InitScheme::kZeros:
        break;
    }
    offset += n_weights + fan_out;
  }
  return MlpModel(arch, std::move(params));
}

MlpModel MlpModel::WithParams(Vector params) const { return MlpModel(arch_, std::move(params)); }

void MlpModel::CheckGrid(const SampleGrid& grid) const {
  if (grid.dim() != arch_.input_dim) {
    throw DimensionError("grid points have dimension " + std::to_string(grid.dim()) +
                         " but the network expects " + std::to_string(arch_.input_dim));
  }
}

namespace {

using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                   Eigen::RowMajor>>;

struct Layer {
  RowMajorMap weight;
  Eigen::Map<const Vector> bias;
  Eigen::Index offset;
};

std::vector<Layer> Layers(const MlpArchitecture& arch, const Vector& params) {
  const auto sizes = arch.LayerSizes();
  std::vector<Layer> layers;
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l];
    const int fan_out = sizes[l + 1];
    layers.push_back(Layer{RowMajorMap(params.data() + offset, fan_out, fan_in),
                           Eigen::Map<const Vector>(params.data() + offset +
                                                        static_cast<Eigen::Index>(fan_in) * fan_out,
                                                    fan_out),
                           offset});
    offset += static_cast<Eigen::Index>(fan_in + 1) * fan_out;
  }
  return layers;
}

// activations[l] is the input of layer l (features x samples); the last
// entry is the network output.
std::vector<Matrix> ForwardPass(const std::vector<Layer>& layers, const Matrix& points) {
  std::vector<Matrix> activations;
  activations.reserve(layers.size() + 1);
  activations.push_back(points.transpose());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Matrix z = layers[l].weight * activations.back();
    z.colwise() += layers[l].bias;
    if (l + 1 < layers.size()) z = z.array().tanh().matrix();
    activations.push_back(std::move(z));
  }
  return activations;
}

// Backpropagates `delta` (output_dim x N) and hands each layer's local
// gradient signal to `visit(layer_index, delta_at_layer_output)`.
template <typename Visit>
void BackwardPass(const std::vector<Layer>& layers, const std::vector<Matrix>& activations,
                  Matrix delta, Visit&& visit) {
  for (std::size_t l = layers.size(); l-- > 0;) {
    visit(l, delta);
    if (l == 0) break;
    Matrix back = layers[l].weight.transpose() * delta;
    // tanh' = 1 - tanh^2, evaluated on this layer's input activation.
    back.array() *= 1.0 - activations[l].array().square();
    delta = std::move(back);
  }
}

}  // namespace

GridFunction MlpModel::Forward(const GridPtr& grid) const {
  CheckGrid(*grid);
  const auto layers = Layers(arch_, params_);
  const auto activations = ForwardPass(layers, grid->points());
  const Matrix& out = activations.back();  // C x N, column-major: sample-major flat layout
  Vector values = Eigen::Map<const Vector>(out.data(), out.size());
  return GridFunction(grid, std::move(values), arch_.output_dim);
}

Matrix MlpModel::Jacobian(const GridPtr& grid) const {
  CheckGrid(*grid);
  const auto layers = Layers(arch_, params_);
  const auto activations = ForwardPass(layers, grid->points());
  const Eigen::Index n = grid->size();
  const int channels = arch_.output_dim;
  Matrix jac(n * channels, params_.size());

  for (int c = 0; c < channels; ++c) {
    Matrix seed = Matrix::Zero(channels, n);
    seed.row(c).setOnes();
    BackwardPass(layers, activations, std::move(seed), [&](std::size_t l, const Matrix& delta) {
      const Matrix& input = activations[l];
      const Eigen::Index fan_out = delta.rows();
      const Eigen::Index fan_in = input.rows();
      const Eigen::Index offset = layers[l].offset;
      for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index row = i * channels + c;
        for (Eigen::Index r = 0; r < fan_out; ++r) {
          const double d = delta(r, i);
          for (Eigen::Index k = 0; k < fan_in; ++k) {
            jac(row, offset + r * fan_in + k) = d * input(k, i);
          }
          jac(row, offset + fan_out * fan_in + r) = d;
        }
      }
    });
  }
  return jac;
}

Vector MlpModel::Pullback(const GridPtr& grid, const Vector& cotangent) const {
  CheckGrid(*grid);
  const Eigen::Index n = grid->size();
  const int channels = arch_.output_dim;
  if (cotangent.size() != n * channels) {
    throw DimensionError("pullback cotangent has the wrong length");
  }
  const auto layers = Layers(arch_, params_);
  const auto activations = ForwardPass(layers, grid->points());
  Vector grad = Vector::Zero(params_.size());
  Matrix seed = Eigen::Map<const Matrix>(cotangent.data(), channels, n);
  BackwardPass(layers, activations, std::move(seed), [&](std::size_t l, const Matrix& delta) {
    const Eigen::Index fan_out = delta.rows();
    const Eigen::Index fan_in = activations[l].rows();
    const Matrix gw = delta * activations[l].transpose();
    const Eigen::Index offset = layers[l].offset;
    for (Eigen::Index r = 0; r < fan_out; ++r) {
      for (Eigen::Index k = 0; k < fan_in; ++k) grad[offset + r * fan_in + k] = gw(r, k);
    }
    grad.segment(offset + fan_out * fan_in, fan_out) = delta.rowwise().sum();
  });
  return grad;
}

double MinSingularValue(const Matrix& jacobian) {
  if (jacobian.size() == 0) throw InputError("Jacobian is empty");
  if (jacobian.cols() > jacobian.rows()) return 0.0;
  Eigen::BDCSVD<Matrix> svd(jacobian);
  return svd.singularValues().minCoeff();
}

Matrix WeightedJacobian(const Matrix& jacobian, const SampleGrid& grid, int channels) {
  if (jacobian.rows() != static_cast<Eigen::Index>(grid.size()) * channels) {
    throw DimensionError("Jacobian rows do not match grid size");
  }
  Matrix out = jacobian;
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const double s = std::sqrt(grid.weights()[i]);
    for (int c = 0; c < channels; ++c) out.row(i * channels + c) *= s;
  }
  return out;
}

LipschitzEstimate EstimateJacobianLipschitz(const MlpModel& model, const GridPtr& grid, int pairs,
                                            double radius, std::uint64_t seed) {
  LipschitzEstimate out;
  if (pairs < 1 || !(radius > 0.0)) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const Eigen::Index p = model.parameter_count();
  const int channels = model.arch().output_dim;

  auto sample = [&]() {
    Vector z(p);
    for (Eigen::Index k = 0; k < p; ++k) z[k] = normal(rng);
    // Uniform in the ball: radius * U^(1/p) along a random direction.
    const double r = radius * std::pow(uniform(rng), 1.0 / static_cast<double>(p));
    return Vector(model.params() + r * z / z.norm());
  };

  for (int k = 0; k < pairs; ++k) {
    const Vector w1 = sample();
    const Vector w2 = sample();
    const double dist = (w1 - w2).norm();
    if (dist == 0.0) continue;
    const Matrix d1 = WeightedJacobian(model.WithParams(w1).Jacobian(grid), *grid, channels);
    const Matrix d2 = WeightedJacobian(model.WithParams(w2).Jacobian(grid), *grid, channels);
    out.value = std::max(out.value, OperatorNorm(d1 - d2) / dist);
    ++out.pairs;
  }
  return out;
}

}  // namespace nmms
