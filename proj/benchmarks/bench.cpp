#include <benchmark/benchmark.h>

#include "xfmr/baselines.hpp"
#include "xfmr/nn.hpp"
#include "xfmr/surrogate.hpp"

using namespace xfmr;

static void BM_ForwardModel(benchmark::State& state) {
    Rng rng(1);
    const auto g = sample_geometry(rng);
    for (auto _ : state) benchmark::DoNotOptimize(forward_model(g));
}
BENCHMARK(BM_ForwardModel);

static void BM_GenerateDataset(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(generate_dataset(static_cast<std::size_t>(state.range(0)), 3));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GenerateDataset)->Arg(6400);

static void BM_GradientStep(benchmark::State& state) {
    const auto arch = nn::make_preset(state.range(1) ? "N7" : "FN7", static_cast<std::size_t>(state.range(0)));
    auto model = nn::init_model(arch, 2);
    const auto ds = generate_dataset(16, 4);
    const auto x = data::Standardizer::fit(ds.x).apply(ds.x);
    auto opt = nn::OptimizerState::zeros(model.parameter_count());
    const nn::HyperParams hp;
    for (auto _ : state) {
        const auto g = nn::gradient(model, x, ds.y, nn::LossKind::sdmse);
        nn::adam_step(model, opt, g.values, hp);
    }
}
BENCHMARK(BM_GradientStep)->Args({128, 0})->Args({128, 1})->Args({512, 1});

static void BM_FitGBT(benchmark::State& state) {
    const auto ds = generate_dataset(static_cast<std::size_t>(state.range(0)), 5);
    baselines::GBTOptions opt;
    opt.rounds = 50;
    for (auto _ : state) benchmark::DoNotOptimize(baselines::fit_gbt(ds.x, ds.y, opt));
}
BENCHMARK(BM_FitGBT)->Arg(600)->Arg(2400)->Unit(benchmark::kMillisecond);

static void BM_FitLinear(benchmark::State& state) {
    const auto ds = generate_dataset(2400, 6);
    for (auto _ : state) benchmark::DoNotOptimize(baselines::fit_linear(ds.x, ds.y));
}
BENCHMARK(BM_FitLinear);

BENCHMARK_MAIN();
