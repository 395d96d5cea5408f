// Serial reference kernels against their OpenMP counterparts.

#include "geocomp/kernels.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

using namespace geocomp;

Eigen::MatrixX2d random_sites(Eigen::Index n) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixX2d s(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) s.row(i) << u(gen), u(gen);
  return s;
}

const CorrelationFamily kExp{CorrelationKind::exponential, 1.5};
const CorrelationFamily kMatern{CorrelationKind::matern, 1.5};

template <bool Parallel>
void BM_Distances(benchmark::State& state) {
  const auto s = random_sites(state.range(0));
  for (auto _ : state) {
    auto d = Parallel ? kernels::pairwise_distances(s, s) : reference::pairwise_distances(s, s);
    benchmark::DoNotOptimize(d.data());
  }
}

template <bool Parallel>
void BM_Correlation(benchmark::State& state) {
  const auto s = random_sites(state.range(0));
  const Eigen::MatrixXd d = reference::pairwise_distances(s, s);
  const CorrelationFamily& fam = state.range(1) ? kMatern : kExp;
  for (auto _ : state) {
    auto c = Parallel ? kernels::correlation_matrix(d, 0.25, fam) : reference::correlation_matrix(d, 0.25, fam);
    benchmark::DoNotOptimize(c.data());
  }
}

template <bool Parallel>
void BM_Assemble(benchmark::State& state) {
  const auto s = random_sites(state.range(0));
  const Eigen::MatrixXd c = reference::correlation_matrix(reference::pairwise_distances(s, s), 0.25, kExp);
  Eigen::MatrixXd a(2, 2), t(2, 2);
  a << 1.0, 0.9, 0.9, 1.2;
  t << 0.1, 0.05, 0.05, 0.2;
  for (auto _ : state) {
    auto m = Parallel ? kernels::assemble_blocks(c, a, &t) : reference::assemble_blocks(c, a, &t);
    benchmark::DoNotOptimize(m.data());
  }
}

}  // namespace

BENCHMARK(BM_Distances<false>)->Arg(100)->Arg(400)->Arg(1000);
BENCHMARK(BM_Distances<true>)->Arg(100)->Arg(400)->Arg(1000);
BENCHMARK(BM_Correlation<false>)->Args({400, 0})->Args({400, 1})->Args({1000, 0});
BENCHMARK(BM_Correlation<true>)->Args({400, 0})->Args({400, 1})->Args({1000, 0});
BENCHMARK(BM_Assemble<false>)->Arg(100)->Arg(400)->Arg(1000);
BENCHMARK(BM_Assemble<true>)->Arg(100)->Arg(400)->Arg(1000);

BENCHMARK_MAIN();
