// SPDX-License-Identifier: Apache-2.0
//
// Microbenchmarks of the hot paths: coupling assembly, cascade forward and
// gradient evaluation, the capacity metric, and the Monte Carlo BER kernel.

#include <benchmark/benchmark.h>

#include "simstack/cascade.hpp"
#include "simstack/metrics.hpp"
#include "simstack/optimize.hpp"
#include "simstack/rng.hpp"

using namespace simstack;

namespace {

const double kLambda = wavelength(28e9);

static void BM_BuildCoupling(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  LayerGeometry first{side, side, 0.5 * kLambda, 0.25 * kLambda * kLambda, 5e-3};
  LayerGeometry second{side, side, 0.5 * kLambda, 0.25 * kLambda * kLambda, 10e-3};
  for (auto _ : state) {
    auto coupling = build_coupling(first, second, kLambda);
    benchmark::DoNotOptimize(coupling.data());
  }
  state.SetComplexityN(side * side);
}
BENCHMARK(BM_BuildCoupling)->Arg(4)->Arg(8)->Arg(10)->Complexity();

static void BM_CascadeForward(benchmark::State& state) {
  const int layers = static_cast<int>(state.range(0));
  const ArchitectureSpec spec =
      make_conventional(layers, 10, 10, kLambda, 5e-3, 0.2);
  ResponseEvaluator evaluator(spec, feed_array_geometry(4, kLambda), kLambda);
  const SimConfig config = evaluator.random_config(1);
  for (auto _ : state) {
    const auto& response = evaluator.response(config);
    benchmark::DoNotOptimize(response.data());
  }
}
BENCHMARK(BM_CascadeForward)->Arg(1)->Arg(4)->Arg(7);

static void BM_CascadeGradient(benchmark::State& state) {
  const int layers = static_cast<int>(state.range(0));
  const ArchitectureSpec spec =
      make_conventional(layers, 10, 10, kLambda, 5e-3, 0.2);
  ResponseEvaluator evaluator(spec, feed_array_geometry(4, kLambda), kLambda);
  const SimConfig config = evaluator.random_config(1);
  const Eigen::MatrixXcd gbar =
      Eigen::MatrixXcd::Ones(evaluator.aperture(), evaluator.feeds());
  Eigen::VectorXd gradient;
  (void)evaluator.response(config);
  for (auto _ : state) {
    evaluator.phase_gradient(config, gbar, gradient);
    benchmark::DoNotOptimize(gradient.data());
  }
}
BENCHMARK(BM_CascadeGradient)->Arg(1)->Arg(4)->Arg(7);

static void BM_Capacity(benchmark::State& state) {
  const ChannelRealization channel = rayleigh_channel(4, 100, 1.0, 3);
  const ChannelRealization response_like = rayleigh_channel(100, 4, 1e-3, 4);
  for (auto _ : state) {
    const double bits =
        capacity(channel.matrix * response_like.matrix, 0.1, 1e-14, 4);
    benchmark::DoNotOptimize(bits);
  }
}
BENCHMARK(BM_Capacity);

static void BM_BerQpsk(benchmark::State& state) {
  Eigen::MatrixXcd effective = Eigen::MatrixXcd::Identity(4, 4);
  effective(0, 1) = 0.05;
  long long symbols = 0;
  for (auto _ : state) {
    const BerPoint point = ber_qpsk(effective, 8.0, 1.0, 7,
                                    {1'000'000'000, state.range(0)});
    symbols += point.symbols;
    benchmark::DoNotOptimize(point.average);
  }
  state.SetItemsProcessed(symbols);
}
BENCHMARK(BM_BerQpsk)->Arg(1 << 16)->Arg(1 << 20);

static void BM_FilmDisplacementGradient(benchmark::State& state) {
  const ArchitectureSpec spec = make_film(10, 10, kLambda, 5e-3, 2.4e-3, 0.2);
  ResponseEvaluator evaluator(spec, feed_array_geometry(4, kLambda), kLambda);
  const SimConfig config = evaluator.random_config(1);
  const Eigen::MatrixXcd gbar =
      Eigen::MatrixXcd::Ones(evaluator.aperture(), evaluator.feeds());
  Eigen::VectorXd gradient;
  (void)evaluator.response(config);
  for (auto _ : state) {
    evaluator.displacement_gradient(config, gbar, gradient);
    benchmark::DoNotOptimize(gradient.data());
  }
}
BENCHMARK(BM_FilmDisplacementGradient);

}  // namespace

BENCHMARK_MAIN();
