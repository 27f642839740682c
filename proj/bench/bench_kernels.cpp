// Serial reference vs OpenMP kernels. Run with OMP_NUM_THREADS set to compare
// scaling; on one core the two should be within noise of each other.

#include <benchmark/benchmark.h>

#include "xfkt/bkt.hpp"
#include "xfkt/evaluation.hpp"
#include "xfkt/synthetic.hpp"

using namespace xfkt;

namespace {

const std::vector<Observations>& sequences(std::size_t count) {
    static std::map<std::size_t, std::vector<Observations>> cache;
    auto it = cache.find(count);
    if (it == cache.end()) it = cache.emplace(count, simulate_bkt_sequences(BktParams{0.3, 0.2, 0.15, 0.1}, count, 20, 1)).first;
    return it->second;
}

void BM_EStepSerial(benchmark::State& state) {
    const auto& seqs = sequences(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(serial::e_step(kDefaultBktParams, seqs));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_EStepParallel(benchmark::State& state) {
    const auto& seqs = sequences(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(e_step(kDefaultBktParams, seqs));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

EmOptions fit_options() {
    EmOptions opt;
    opt.restarts = 1;
    return opt;
}

void BM_FitSerial(benchmark::State& state) {
    const auto& seqs = sequences(2000);
    for (auto _ : state) benchmark::DoNotOptimize(serial::fit_bkt_sequences(seqs, fit_options()));
}

void BM_FitParallel(benchmark::State& state) {
    const auto& seqs = sequences(2000);
    for (auto _ : state) benchmark::DoNotOptimize(fit_bkt_sequences(seqs, fit_options()));
}

ExperimentConfig experiment() {
    static const auto ds = std::make_shared<const Dataset>(make_synthetic_dataset(SyntheticSpec{}));
    ExperimentConfig cfg;
    cfg.dataset = ds;
    cfg.n_students = 50;
    cfg.repeats = 1;
    cfg.max_in_flight = 8;
    return cfg;
}

void BM_ExperimentSerial(benchmark::State& state) {
    const auto cfg = experiment();
    const auto provider = make_mock_provider();
    for (auto _ : state) benchmark::DoNotOptimize(serial::run_experiment(cfg, provider));
}

void BM_ExperimentParallel(benchmark::State& state) {
    const auto cfg = experiment();
    const auto provider = make_mock_provider();
    for (auto _ : state) benchmark::DoNotOptimize(run_experiment(cfg, provider));
}

}  // namespace

BENCHMARK(BM_EStepSerial)->Arg(500)->Arg(2000)->Arg(8000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_EStepParallel)->Arg(500)->Arg(2000)->Arg(8000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_FitSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FitParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ExperimentSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ExperimentParallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
