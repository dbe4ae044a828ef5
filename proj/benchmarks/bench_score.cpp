#include <benchmark/benchmark.h>

#include "bridge/rng.hpp"
#include "bridge/sampler.hpp"
#include "bridge/score.hpp"

namespace {

using namespace bridge;

Eigen::MatrixXd latent_points(Eigen::Index n) {
  SplitMix64 rng(7);
  Eigen::MatrixXd m(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    m(i, 0) = rng.next_uniform(-1.0, 1.0);
    m(i, 1) = rng.next_uniform(-1.0, 1.0);
  }
  return m;
}

void BM_OracleScore(benchmark::State& state) {
  const ConvolutionDensity cd{latent_points(state.range(0)), 1.0};
  SplitMix64 rng(9);
  Eigen::VectorXd x(2);
  x << rng.next_normal(), rng.next_normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(oracle_score(cd, 0.5, x));
  }
}
BENCHMARK(BM_OracleScore)->Arg(64)->Arg(200)->Arg(1024);

void BM_EmChain(benchmark::State& state) {
  const Eigen::MatrixXd latent = latent_points(200);
  const ConvolutionDensity cd{latent, 1.0};
  const ScoreFn oracle = oracle_score_fn(cd);
  const DiffusionSchedule schedule =
      manual_schedule(1.0, static_cast<int>(state.range(0)), 0.9, 8.0);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_chain(latent, oracle, schedule, seed++));
  }
}
BENCHMARK(BM_EmChain)->Arg(100)->Arg(1000);

}  // namespace
