#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nmms/error.hpp"
#include "nmms/hilbert.hpp"
#include "oracles.hpp"

namespace nmms {
namespace {

using testing::RandomFunction;

GridPtr TwoPointGrid() {
  Matrix pts(2, 1);
  pts << 0.0, 1.0;
  return SampleGrid::Uniform(pts);
}

GridFunction Values(const GridPtr& g, std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (double d : v) x[i++] = d;
  return GridFunction(g, x);
}

TEST(SampleGrid, UniformHasUnitRelativeWeights) {
  const GridPtr g = SampleGrid::Linspace(-1.0, 1.0, 7);
  EXPECT_EQ(g->size(), 7);
  for (int i = 0; i < 7; ++i) {
    EXPECT_EQ(g->relative_weights()[i], 1.0);
  }
  EXPECT_DOUBLE_EQ(g->points()(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(g->points()(6, 0), 1.0);
}

TEST(SampleGrid, RejectsBadWeights) {
  Matrix pts(2, 1);
  pts << 0.0, 1.0;
  EXPECT_THROW(SampleGrid(pts, Vector::Constant(2, 0.3)), InputError);
  Vector neg(2);
  neg << 1.5, -0.5;
  EXPECT_THROW(SampleGrid(pts, neg), InputError);
  EXPECT_THROW(SampleGrid(pts, Vector::Constant(3, 1.0 / 3.0)), InputError);
}

TEST(Inner, Examples) {
  const GridPtr g = TwoPointGrid();
  EXPECT_DOUBLE_EQ(Inner(GridFunction::Constant(g, 1.0), GridFunction::Constant(g, 1.0)), 1.0);
  EXPECT_EQ(Inner(Values(g, {1, 0}), Values(g, {0, 1})), 0.0);
  EXPECT_DOUBLE_EQ(Inner(Values(g, {2, 2}), Values(g, {3, 3})), 6.0);
}

TEST(Inner, GridMismatchThrows) {
  const GridPtr a = TwoPointGrid();
  const GridPtr b = SampleGrid::Linspace(0.0, 2.0, 2);
  EXPECT_THROW(Inner(GridFunction::Zeros(a), GridFunction::Zeros(b)), DimensionError);
  EXPECT_THROW(Inner(GridFunction::Zeros(a), GridFunction::Zeros(a, 2)), DimensionError);
}

TEST(Inner, SymmetricAndBilinear) {
  std::mt19937_64 rng(3);
  const GridPtr g = testing::RandomGrid(40, 2, rng);
  for (int t = 0; t < 20; ++t) {
    const GridFunction u = RandomFunction(g, rng);
    const GridFunction v = RandomFunction(g, rng);
    const GridFunction z = RandomFunction(g, rng);
    EXPECT_EQ(Inner(u, v), Inner(v, u));
    const double lhs = Inner(2.5 * u + v, z);
    const double rhs = 2.5 * Inner(u, z) + Inner(v, z);
    EXPECT_NEAR(lhs, rhs, 1e-12 * (1.0 + std::abs(rhs)));
  }
}

TEST(Norm, Examples) {
  const GridPtr g = TwoPointGrid();
  EXPECT_EQ(Norm(GridFunction::Zeros(g)), 0.0);
  EXPECT_DOUBLE_EQ(Norm(GridFunction::Constant(g, -3.0)), 3.0);
  EXPECT_DOUBLE_EQ(Norm(Values(g, {3, 4})), std::sqrt(12.5));
}

TEST(Norm, NonuniformWeights) {
  Matrix pts(3, 1);
  pts << 0, 1, 2;
  Vector w(3);
  w << 0.5, 0.25, 0.25;
  const GridPtr g = SampleGrid::Create(pts, w);
  EXPECT_DOUBLE_EQ(g->relative_weights()[0], 1.5);
  EXPECT_DOUBLE_EQ(Norm(Values(g, {2, 0, 4})), std::sqrt(0.5 * 4 + 0.25 * 16));
}

TEST(IncrementObjective, Examples) {
  const GridPtr g = SampleGrid::Linspace(0.0, 1.0, 5);
  std::mt19937_64 rng(1);
  const GridFunction f = RandomFunction(g, rng);
  const QuadraticRegressionEnergy energy(f);
  const GridFunction v = RandomFunction(g, rng);
  EXPECT_EQ(IncrementObjective(GridFunction::Zeros(g), v, 0.3, energy), energy.Value(v));
  EXPECT_EQ(IncrementObjective(GridFunction::Zeros(g), f, 0.3, energy), 0.0);

  const QuadraticRegressionEnergy zero_target(GridFunction::Zeros(g));
  EXPECT_DOUBLE_EQ(IncrementObjective(GridFunction::Constant(g, 1.0), GridFunction::Zeros(g), 1.0,
                                      zero_target),
                   1.0);
  EXPECT_THROW(IncrementObjective(v, v, 0.0, energy), ParameterError);
  EXPECT_THROW(IncrementObjective(v, v, -1.0, energy), ParameterError);
}

TEST(IncrementObjective, MidpointConvexity) {
  std::mt19937_64 rng(11);
  const GridPtr g = testing::RandomGrid(30, 1, rng);
  const testing::LogCoshEnergy energy(RandomFunction(g, rng), 0.5);
  const GridFunction v = RandomFunction(g, rng);
  for (int t = 0; t < 100; ++t) {
    const GridFunction h1 = RandomFunction(g, rng);
    const GridFunction h2 = RandomFunction(g, rng);
    const double mid = IncrementObjective(0.5 * (h1 + h2), v, 0.2, energy);
    const double avg =
        0.5 * (IncrementObjective(h1, v, 0.2, energy) + IncrementObjective(h2, v, 0.2, energy));
    EXPECT_LE(mid, avg + 1e-12);
  }
}

TEST(QuadraticEnergy, ValueAndGradient) {
  const GridPtr g = TwoPointGrid();
  const QuadraticRegressionEnergy energy(Values(g, {1, -1}));
  const GridFunction u = Values(g, {3, 1});
  EXPECT_DOUBLE_EQ(energy.Value(u), 0.5 * (0.5 * 4 + 0.5 * 4));
  const GridFunction grad = energy.Gradient(u);
  EXPECT_DOUBLE_EQ(grad[0], 2.0);
  EXPECT_DOUBLE_EQ(grad[1], 2.0);
}

TEST(ExactProx, Examples) {
  const GridPtr g = SampleGrid::Linspace(-1.0, 1.0, 9);
  std::mt19937_64 rng(5);
  const GridFunction f = RandomFunction(g, rng);
  const QuadraticRegressionEnergy energy(f);
  const GridFunction fixed = ExactProx(f, 0.7, energy);
  for (int i = 0; i < g->size(); ++i) EXPECT_DOUBLE_EQ(fixed[i], f[i]);

  const QuadraticRegressionEnergy zero_target(GridFunction::Zeros(g));
  const GridFunction half = ExactProx(GridFunction::Constant(g, 1.0), 1.0, zero_target);
  for (int i = 0; i < g->size(); ++i) EXPECT_DOUBLE_EQ(half[i], 0.5);

  EXPECT_THROW(ExactProx(f, 0.0, energy), ParameterError);
}

TEST(ExactProx, ClosedFormMatchesNewton) {
  std::mt19937_64 rng(7);
  const GridPtr g = testing::RandomGrid(64, 1, rng);
  const GridFunction f = RandomFunction(g, rng);
  const QuadraticRegressionEnergy energy(f);
  const GridFunction v = RandomFunction(g, rng);
  const GridFunction closed = ExactProx(v, 0.1, energy);
  const GridFunction newton = NewtonProx(v, 0.1, energy);
  for (int i = 0; i < g->size(); ++i) {
    EXPECT_NEAR(closed[i], (v[i] + 0.1 * f[i]) / 1.1, 1e-15);
    EXPECT_NEAR(newton[i], closed[i], 1e-12);
  }
}

TEST(ExactProx, GenericEnergyMatchesBisection) {
  std::mt19937_64 rng(9);
  const GridPtr g = testing::RandomGrid(50, 1, rng);
  const testing::LogCoshEnergy energy(RandomFunction(g, rng), 0.3);
  const GridFunction v = 3.0 * RandomFunction(g, rng);
  for (double tau : {0.01, 0.5, 4.0}) {
    const GridFunction prox = ExactProx(v, tau, energy);
    const GridFunction oracle = testing::BisectionProx(v, tau, energy);
    for (int i = 0; i < g->size(); ++i) EXPECT_NEAR(prox[i], oracle[i], 1e-11);
  }
}

TEST(ExactProx, ContractionRatioQuadratic) {
  std::mt19937_64 rng(13);
  const GridPtr g = testing::RandomGrid(32, 1, rng);
  const QuadraticRegressionEnergy energy(RandomFunction(g, rng));
  for (double tau : {0.01, 0.1, 1.0, 10.0}) {
    for (int t = 0; t < 25; ++t) {
      const GridFunction x = RandomFunction(g, rng);
      const GridFunction y = RandomFunction(g, rng);
      const double ratio =
          Norm(ExactProx(x, tau, energy) - ExactProx(y, tau, energy)) / Norm(x - y);
      EXPECT_NEAR(ratio, 1.0 / (1.0 + tau), 1e-10);
    }
  }
}

TEST(ExactProx, ContractionBoundGeneric) {
  std::mt19937_64 rng(17);
  const GridPtr g = testing::RandomGrid(20, 1, rng);
  const testing::LogCoshEnergy energy(RandomFunction(g, rng), 0.5);
  const double tau = 0.4;
  for (int t = 0; t < 30; ++t) {
    const GridFunction x = RandomFunction(g, rng);
    const GridFunction y = RandomFunction(g, rng);
    const double lhs = Norm(ExactProx(x, tau, energy) - ExactProx(y, tau, energy));
    EXPECT_LE(lhs, Norm(x - y) / (1.0 + tau * 0.5) + 1e-11);
  }
}

TEST(ExactProx, EnergyDecrease) {
  std::mt19937_64 rng(19);
  const GridPtr g = testing::RandomGrid(25, 1, rng);
  const testing::LogCoshEnergy energy(RandomFunction(g, rng), 1.0);
  for (int t = 0; t < 30; ++t) {
    const GridFunction v = 2.0 * RandomFunction(g, rng);
    const GridFunction u = ExactProx(v, 0.3, energy);
    const double d = Norm(u - v);
    EXPECT_LE(energy.Value(u) + d * d / (2 * 0.3), energy.Value(v) + 1e-14);
  }
}

TEST(NewtonProx, IterationCapReportsResidual) {
  std::mt19937_64 rng(23);
  const GridPtr g = testing::RandomGrid(10, 1, rng);
  const testing::LogCoshEnergy energy(RandomFunction(g, rng), 0.1);
  NewtonProxOptions opts;
  opts.max_iterations = 1;
  opts.residual_tolerance = 1e-300;
  try {
    NewtonProx(10.0 * RandomFunction(g, rng), 5.0, energy, opts);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_GT(e.residual(), 0.0);
  }
}

TEST(GridFunction, ChannelLayout) {
  const GridPtr g = TwoPointGrid();
  Vector v(4);
  v << 1, 2, 3, 4;
  const GridFunction u(g, v, 2);
  EXPECT_EQ(u.channels(), 2);
  // sum_i w_i sum_c u_ic^2 = 0.5 (1 + 4) + 0.5 (9 + 16)
  EXPECT_DOUBLE_EQ(Inner(u, u), 15.0);
  EXPECT_THROW(GridFunction(g, Vector::Zero(3), 1), DimensionError);
}

}  // namespace
}  // namespace nmms
