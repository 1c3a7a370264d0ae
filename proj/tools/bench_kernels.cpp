// Serial reference vs OpenMP kernels. Sizes are (features, samples).
#include "pa1smt/kernels.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

using pa1smt::Matrix;
namespace kernels = pa1smt::kernels;

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

template <Matrix (*Fn)(const Matrix&)>
void pairwise(benchmark::State& state) {
  const Matrix x = random_matrix(state.range(0), state.range(1), 1);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(x));
  state.SetItemsProcessed(state.iterations() * state.range(1) * state.range(1));
}

template <Matrix (*Fn)(const Matrix&, const Matrix&, double)>
void gaussian(benchmark::State& state) {
  const Matrix x = random_matrix(state.range(0), state.range(1), 2);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(x, x, 3.0));
  state.SetItemsProcessed(state.iterations() * state.range(1) * state.range(1));
}

// Label-space memberships for C = range(0) clusters.
template <Matrix (*Fn)(const Matrix&, double)>
void memberships(benchmark::State& state) {
  const Matrix outputs = random_matrix(state.range(0), state.range(1), 3);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(outputs, 1e-12));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}

void sizes(benchmark::internal::Benchmark* b) {
  b->Args({20, 256})->Args({20, 1024})->Args({200, 1024});
}

void cluster_sizes(benchmark::internal::Benchmark* b) {
  b->Args({6, 10000})->Args({30, 100000});
}

}  // namespace

BENCHMARK(pairwise<kernels::serial::pairwise_sq_dists>)->Name("pairwise/serial")->Apply(sizes);
BENCHMARK(pairwise<kernels::parallel::pairwise_sq_dists>)->Name("pairwise/parallel")->Apply(sizes)->UseRealTime();
BENCHMARK(gaussian<kernels::serial::gaussian_kernel>)->Name("gaussian/serial")->Apply(sizes);
BENCHMARK(gaussian<kernels::parallel::gaussian_kernel>)->Name("gaussian/parallel")->Apply(sizes)->UseRealTime();
BENCHMARK(memberships<kernels::serial::memberships>)->Name("memberships/serial")->Apply(cluster_sizes);
BENCHMARK(memberships<kernels::parallel::memberships>)->Name("memberships/parallel")->Apply(cluster_sizes)->UseRealTime();

BENCHMARK_MAIN();
