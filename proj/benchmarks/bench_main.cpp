#include <benchmark/benchmark.h>

#include <random>

#include "hgff/corrector.hpp"
#include "hgff/green.hpp"
#include "hgff/markov.hpp"
#include "hgff/spectral.hpp"

using namespace hgff;

static void BM_InverseLaplacian(benchmark::State& state) {
  const TorusGrid g(3, static_cast<int>(state.range(0)));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> N;
  std::vector<double> f(g.sites());
  for (auto& v : f) v = N(rng);
  for (auto _ : state) benchmark::DoNotOptimize(solve_shifted(g, f, 0.0));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.sites()));
}
BENCHMARK(BM_InverseLaplacian)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_CorrectorSolve(benchmark::State& state) {
  const TorusGrid g(3, static_cast<int>(state.range(0)));
  const ConductanceField a = sample_conductance(g, profile_by_name("tanh"), 0.3, 1);
  Eigen::VectorXd e = Eigen::VectorXd::Unit(3, 0);
  for (auto _ : state) benchmark::DoNotOptimize(solve_corrector(a, e, 0.0, 1e-10));
}
BENCHMARK(BM_CorrectorSolve)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

static void BM_GreenTable(benchmark::State& state) {
  for (auto _ : state) {
    GreenTable T(3, 0.0, static_cast<int>(state.range(0)), 10, false);
    benchmark::DoNotOptimize(T({0, 0, 0}));
  }
}
BENCHMARK(BM_GreenTable)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

static void BM_PairingFourier(benchmark::State& state) {
  const Eigen::MatrixXd a = Eigen::Vector3d(2, 1, 1).asDiagonal(), Q = Eigen::MatrixXd::Identity(3, 3);
  const BumpFunction f1{{0, 0, -1.5}, 0.5}, f2{{0, 0, 1.5}, 0.5};
  for (auto _ : state) benchmark::DoNotOptimize(pairing_fourier(f1, f2, a, Q));
}
BENCHMARK(BM_PairingFourier)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
