// Throughput of the hot kernels at the default 64x64 working size.

#include <benchmark/benchmark.h>

#include <random>

#include "ttmr/autodiff/ops.hpp"
#include "ttmr/backbone/strategy.hpp"
#include "ttmr/data/dataset.hpp"
#include "ttmr/kspace/fft.hpp"
#include "ttmr/ttm/ttm.hpp"

namespace {

using namespace ttmr;

Tensor<float> random_tensor(const Shape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  Tensor<float> t(shape);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

void BM_Conv3x3(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto x = random_tensor({c, 64, 64}, 1);
  const auto w = random_tensor({c, c, 3, 3}, 2);
  const auto b = random_tensor({c}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(ad::kernels::conv2d(x, w, b, 1, 1));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * c * c * 9 * 64 * 64));
}
BENCHMARK(BM_Conv3x3)->Arg(48)->Arg(64)->Unit(benchmark::kMicrosecond);

void BM_ConvForwardBackward(benchmark::State& state) {
  const auto x = random_tensor({48, 64, 64}, 1);
  const auto w = random_tensor({48, 48, 3, 3}, 2);
  const auto b = random_tensor({48}, 3);
  for (auto _ : state) {
    ad::Graph<float> g;
    const auto wv = g.variable(w);
    const auto y = ad::conv2d(g, g.variable(x), wv, g.variable(b), 1, 1);
    g.backward(ad::sum(g, y));
    benchmark::DoNotOptimize(g.grad(wv));
  }
}
BENCHMARK(BM_ConvForwardBackward)->Unit(benchmark::kMillisecond);

void BM_Fft2c(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const kspace::ComplexImage<float> img(random_tensor({2, n, n}, 4));
  for (auto _ : state) benchmark::DoNotOptimize(kspace::fft2c(img));
}
BENCHMARK(BM_Fft2c)->Arg(64)->Arg(320)->Unit(benchmark::kMicrosecond);

void BM_Relevance(benchmark::State& state) {
  const auto patch = static_cast<std::size_t>(state.range(0));
  const auto q = random_tensor({64, 64, 64}, 5);
  const auto k = random_tensor({64, 64, 64}, 6);
  for (auto _ : state) {
    ad::Graph<float> g;
    benchmark::DoNotOptimize(g.value(ttm::relevance(g, g.constant(q), g.constant(k), patch, patch / 2)));
  }
}
BENCHMARK(BM_Relevance)->Arg(16)->Arg(8)->Unit(benchmark::kMicrosecond);

void BM_TtmForward(benchmark::State& state) {
  const ttm::TtmConfig cfg;
  ad::ParameterSet<float> params;
  ttm::init_params(params, cfg, 7);
  const auto x = random_tensor({2, 64, 64}, 8);
  const auto xr = random_tensor({2, 64, 64}, 9);
  const auto yr = random_tensor({2, 64, 64}, 10);
  for (auto _ : state) {
    ad::Graph<float> g;
    const auto b = ad::bind(g, params, nullptr);
    const auto out = ttm::ttm_forward(g, b, g.constant(x), g.constant(xr), g.constant(yr), cfg);
    benchmark::DoNotOptimize(g.value(out.synthesized));
  }
}
BENCHMARK(BM_TtmForward)->Unit(benchmark::kMillisecond);

void BM_Reconstruct(benchmark::State& state) {
  const auto strategy = backbone::all_strategies()[static_cast<std::size_t>(state.range(0))];
  const backbone::Model<float> model(backbone::StrategyConfig::make(strategy, 0));
  const auto manifest = data::SplitManifest::make(1, 1, 4, 1, 64, 0);
  const auto ds = data::build_dataset(manifest);
  for (auto _ : state) benchmark::DoNotOptimize(model.reconstruct(ds.test.front()));
  state.SetLabel(backbone::to_string(strategy));
}
BENCHMARK(BM_Reconstruct)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
