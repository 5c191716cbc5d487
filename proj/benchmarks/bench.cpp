#include <benchmark/benchmark.h>

#include <random>

#include "compenkit/model.hpp"
#include "compenkit/ops.hpp"

using namespace compenkit;

static void BM_Conv2dForward(benchmark::State& state) {
    const std::int64_t ch = state.range(0);
    const std::int64_t side = state.range(1);
    std::mt19937 rng(0);
    NoGradGuard ng;
    auto x = Tensor::randn({4, ch, side, side}, rng);
    auto w = Tensor::randn({ch, ch, 3, 3}, rng, 0.05f);
    auto b = Tensor::zeros({ch});
    for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, b, 1, 1));
    state.SetItemsProcessed(state.iterations() * 4 * ch * ch * 9 * side * side);
}
BENCHMARK(BM_Conv2dForward)->Args({32, 64})->Args({64, 32})->Args({128, 16});

static void BM_Conv2dTrainStep(benchmark::State& state) {
    const std::int64_t ch = state.range(0);
    const std::int64_t side = state.range(1);
    std::mt19937 rng(0);
    auto x = Tensor::randn({4, ch, side, side}, rng);
    auto w = Tensor::randn({ch, ch, 3, 3}, rng, 0.05f);
    auto b = Tensor::zeros({ch});
    w.set_requires_grad(true);
    b.set_requires_grad(true);
    for (auto _ : state) {
        w.zero_grad();
        b.zero_grad();
        auto l = sum(conv2d(x, w, b, 1, 1));
        backward(l);
    }
}
BENCHMARK(BM_Conv2dTrainStep)->Args({32, 64})->Args({64, 32});

static void BM_GridSample(benchmark::State& state) {
    const std::int64_t side = state.range(0);
    std::mt19937 rng(0);
    NoGradGuard ng;
    auto x = Tensor::rand_uniform({4, 3, side, side}, rng);
    auto g = tile_batch(identity_grid<float>(side, side), 4);
    for (auto _ : state) benchmark::DoNotOptimize(grid_sample_bilinear(x, g));
    state.SetItemsProcessed(state.iterations() * 4 * 3 * side * side);
}
BENCHMARK(BM_GridSample)->Arg(128)->Arg(256);

static void BM_ModelForward(benchmark::State& state) {
    auto model = CompensationModel::make(ModelConfig{});
    model.init(0);
    std::mt19937 rng(0);
    NoGradGuard ng;
    auto x = Tensor::rand_uniform({4, 3, 128, 128}, rng);
    auto s = Tensor::rand_uniform({1, 3, 128, 128}, rng);
    for (auto _ : state) benchmark::DoNotOptimize(model.forward(x, s));
}
BENCHMARK(BM_ModelForward);

BENCHMARK_MAIN();
