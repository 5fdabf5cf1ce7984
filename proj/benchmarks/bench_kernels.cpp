// Timings for the kernels that dominate an outer step.

#include <benchmark/benchmark.h>

#include <cmath>

#include "nmms/hilbert.hpp"
#include "nmms/linalg.hpp"
#include "nmms/network.hpp"
#include "nmms/solvers.hpp"

namespace {

using namespace nmms;

MlpModel Net(int width) {
  MlpArchitecture arch;
  arch.hidden_widths = {width};
  return MlpModel::Initialize(arch, 0);
}

GridFunction Target(const GridPtr& grid) {
  Vector y(grid->size());
  for (int i = 0; i < grid->size(); ++i) {
    const double x = grid->points()(i, 0);
    y[i] = x * x + 0.3 * std::sin(2 * M_PI * x);
  }
  return GridFunction(grid, y, 1);
}

void BM_Jacobian(benchmark::State& state) {
  const GridPtr grid = SampleGrid::Linspace(-1, 1, static_cast<int>(state.range(0)));
  const MlpModel model = Net(32);
  for (auto _ : state) benchmark::DoNotOptimize(model.Jacobian(grid));
}
BENCHMARK(BM_Jacobian)->Arg(256)->Arg(1024);

void BM_CgSolve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Matrix b = Matrix::Random(2 * n, n);
  const Matrix a = b.transpose() * b + Matrix::Identity(n, n);
  const Vector rhs = Vector::Ones(n);
  CgConfig cfg;
  cfg.max_iters = n;
  for (auto _ : state) {
    benchmark::DoNotOptimize(CgSolve([&](const Vector& x) { return Vector(a * x); }, rhs, cfg));
  }
}
BENCHMARK(BM_CgSolve)->Arg(97)->Arg(385);

void BM_GnSubproblem(benchmark::State& state) {
  const GridPtr grid = SampleGrid::Linspace(-1, 1, 256);
  const MlpModel model = Net(static_cast<int>(state.range(0)));
  const QuadraticRegressionEnergy energy(Target(grid));
  const SubproblemSpec spec = SubproblemSpec::WarmStart(model, energy, 0.1, grid);
  GnConfig cfg;
  cfg.lm_damping = 1e-3;
  for (auto _ : state) benchmark::DoNotOptimize(SolveSubproblemGn(spec, cfg));
}
BENCHMARK(BM_GnSubproblem)->Arg(32)->Arg(128);

void BM_ExactProx(benchmark::State& state) {
  const GridPtr grid = SampleGrid::Linspace(-1, 1, static_cast<int>(state.range(0)));
  const QuadraticRegressionEnergy energy(Target(grid));
  const GridFunction v = GridFunction::Zeros(grid);
  for (auto _ : state) benchmark::DoNotOptimize(ExactProx(v, 0.1, energy));
}
BENCHMARK(BM_ExactProx)->Arg(256)->Arg(4096);

}  // namespace

BENCHMARK_MAIN();
