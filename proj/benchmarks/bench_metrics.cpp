#include <benchmark/benchmark.h>

#include "bridge/metrics.hpp"
#include "bridge/rng.hpp"

namespace {

using namespace bridge;

Eigen::MatrixXd points(Eigen::Index n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Eigen::MatrixXd m(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    m(i, 0) = rng.next_uniform(-1.0, 1.0);
    m(i, 1) = rng.next_uniform(-1.0, 1.0);
  }
  return m;
}

void BM_W2Exact(benchmark::State& state) {
  const Eigen::MatrixXd a = points(state.range(0), 1);
  const Eigen::MatrixXd b = points(state.range(0), 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(w2_exact(a, b));
  }
}
BENCHMARK(BM_W2Exact)->Arg(64)->Arg(200)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_W2Sliced(benchmark::State& state) {
  const Eigen::MatrixXd a = points(2048, 1);
  const Eigen::MatrixXd b = points(2048, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(w2_sliced(a, b, static_cast<int>(state.range(0)), 3));
  }
}
BENCHMARK(BM_W2Sliced)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace
