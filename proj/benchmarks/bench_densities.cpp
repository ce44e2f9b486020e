#include <benchmark/benchmark.h>

#include "possmix/densities.hpp"
#include "possmix/simulate.hpp"
#include "possmix/special.hpp"

using namespace possmix;

namespace {

const MixtureParams& params() {
    static MixtureParams p = scenario_params(0.65);
    return p;
}

const Dataset& data400() {
    static Dataset d = generate_dataset(Scenario::easy, 400, 1).first;
    return d;
}

}  // namespace

static void BM_mixture_loglik_n400(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(mixture_loglik(data400(), params()));
}
BENCHMARK(BM_mixture_loglik_n400)->Unit(benchmark::kMillisecond);

static void BM_possession_loglik(benchmark::State& state) {
    const Possession& poss = data400().possessions[0];
    for (auto _ : state) benchmark::DoNotOptimize(possession_loglik(poss, params(), 0).total_ll);
}
BENCHMARK(BM_possession_loglik);

static void BM_truncnorm_logpdf(benchmark::State& state) {
    double acc = 0.0, du = 0.4;
    for (auto _ : state) {
        acc += truncnorm_logpdf(du, -3.0, 11.0, 1.8);
        du = -du;
    }
    benchmark::DoNotOptimize(acc);
}
BENCHMARK(BM_truncnorm_logpdf);

static void BM_gamma_logpdf(benchmark::State& state) {
    double acc = 0.0;
    for (auto _ : state) acc += gamma_logpdf(1.7, 2.3, 0.9);
    benchmark::DoNotOptimize(acc);
}
BENCHMARK(BM_gamma_logpdf);

static void BM_norm_ppf(benchmark::State& state) {
    double p = 0.12345;
    double acc = 0.0;
    for (auto _ : state) {
        acc += norm_ppf(p);
        p = p < 0.9 ? p + 0.0371 : 0.0371;
    }
    benchmark::DoNotOptimize(acc);
}
BENCHMARK(BM_norm_ppf);
