#include <benchmark/benchmark.h>

#include "possmix/gem.hpp"
#include "possmix/simulate.hpp"

using namespace possmix;

namespace {

const Dataset& data400() {
    static Dataset d = generate_dataset(Scenario::easy, 400, 1).first;
    return d;
}

}  // namespace

static void BM_e_step_n400(benchmark::State& state) {
    MixtureParams p = scenario_params(0.65);
    for (auto _ : state) benchmark::DoNotOptimize(e_step(data400(), p).r(0, 0));
}
BENCHMARK(BM_e_step_n400)->Unit(benchmark::kMillisecond);

static void BM_gem_iteration_n400(benchmark::State& state) {
    // includes the one-off dataset preparation each call, like the public API
    MixtureParams p = scenario_params(0.65);
    GemState st(3, 5);
    FitConfig cfg;
    cfg.k = 3;
    for (auto _ : state) {
        GemStepResult step = gem_iteration(data400(), p, st, cfg);
        p = std::move(step.params);
        benchmark::DoNotOptimize(step.loglik);
    }
}
BENCHMARK(BM_gem_iteration_n400)->Unit(benchmark::kMillisecond);

static void BM_fit_short_phase(benchmark::State& state) {
    Dataset d = generate_dataset(Scenario::easy, 100, 2).first;
    FitConfig cfg;
    cfg.k = 3;
    cfg.n_starts = 8;
    cfg.n_keep = 2;
    cfg.n_long_iters = 15;
    for (auto _ : state) {
        cfg.seed += 1;
        benchmark::DoNotOptimize(fit(d, cfg).loglik);
    }
}
BENCHMARK(BM_fit_short_phase)->Unit(benchmark::kMillisecond);
