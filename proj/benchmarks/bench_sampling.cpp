#include <benchmark/benchmark.h>

#include "possmix/rng.hpp"
#include "possmix/simulate.hpp"

using namespace possmix;

static void BM_sample_gamma(benchmark::State& state) {
    Rng rng(1);
    double acc = 0.0;
    for (auto _ : state) acc += sample_gamma(rng, 1.65, 1.0);
    benchmark::DoNotOptimize(acc);
}
BENCHMARK(BM_sample_gamma);

static void BM_sample_trunc_normal(benchmark::State& state) {
    Rng rng(2);
    double acc = 0.0;
    for (auto _ : state) acc += sample_trunc_normal(rng, 60.0, 2.5, 0.0, 120.0);
    benchmark::DoNotOptimize(acc);
}
BENCHMARK(BM_sample_trunc_normal);

static void BM_sample_possession_easy(benchmark::State& state) {
    MixtureParams p = scenario_params(0.65);
    Rng rng(3);
    long events = 0;
    for (auto _ : state) {
        Possession poss = sample_possession(p, 1, 60.0, 40.0, rng);
        events += poss.size();
        benchmark::DoNotOptimize(poss.events.back().time);
    }
    state.SetItemsProcessed(events);
}
BENCHMARK(BM_sample_possession_easy);

static void BM_generate_dataset_n50(benchmark::State& state) {
    std::uint64_t seed = 0;
    for (auto _ : state) {
        auto [data, labels] = generate_dataset(Scenario::easy, 50, ++seed);
        benchmark::DoNotOptimize(data.total_events());
    }
}
BENCHMARK(BM_generate_dataset_n50)->Unit(benchmark::kMillisecond);
