#include <benchmark/benchmark.h>

#include "bridge/nn.hpp"
#include "bridge/rng.hpp"

namespace {

using namespace bridge;

void BM_Forward(benchmark::State& state) {
  const int width = static_cast<int>(state.range(0));
  const MlpNetwork net = make_mlp({3, width, width, 2}, 1);
  SplitMix64 rng(2);
  Eigen::VectorXd x(3);
  for (int i = 0; i < 3; ++i) x[i] = rng.next_normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(net, x));
  }
}
BENCHMARK(BM_Forward)->Arg(32)->Arg(64)->Arg(128);

void BM_Backward(benchmark::State& state) {
  const int width = static_cast<int>(state.range(0));
  const MlpNetwork net = make_mlp({3, width, width, 2}, 1);
  SplitMix64 rng(2);
  Eigen::VectorXd x(3), u(2);
  for (int i = 0; i < 3; ++i) x[i] = rng.next_normal();
  for (int i = 0; i < 2; ++i) u[i] = rng.next_normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(backward(net, x, u));
  }
}
BENCHMARK(BM_Backward)->Arg(32)->Arg(64)->Arg(128);

}  // namespace
