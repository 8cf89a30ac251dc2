// Microbenchmarks for the packing pipeline: workload generation, forest construction, labeling and the naive
// per-candidate baseline, scaled over the number of candidates.

#include <ppf/bench.hpp>
#include <ppf/forest.hpp>
#include <ppf/labeling.hpp>

#include <benchmark/benchmark.h>

namespace {

ppf::ScenarioConfig scaled(std::int64_t plans, std::int64_t nodes_per_plan)
{
    ppf::ScenarioConfig c = ppf::preset("s1");
    c.num_plans = static_cast<std::size_t>(plans);
    c.nodes_per_plan = static_cast<std::size_t>(nodes_per_plan);
    c.max_alternatives = c.num_plans;
    return c;
}

void set_counters(benchmark::State &state, const ppf::SizeStats &stats)
{
    state.counters["nodes"] = benchmark::Counter(static_cast<double>(stats.total_nodes),
                                                 benchmark::Counter::kIsIterationInvariantRate);
    state.counters["UniqA"] = static_cast<double>(stats.unique_all);
    state.counters["UniqF"] = static_cast<double>(stats.unique_feasible);
}

void BM_Generate(benchmark::State &state)
{
    const auto cfg = scaled(state.range(0), state.range(1));
    for (auto _ : state)
        benchmark::DoNotOptimize(ppf::generate(cfg));
}

void BM_Build(benchmark::State &state)
{
    const auto wl = ppf::generate(scaled(state.range(0), state.range(1)));
    ppf::BuildOptions opts;
    opts.limit = wl.num_plans;
    ppf::SizeStats stats;
    for (auto _ : state) {
        auto r = ppf::build(wl.spec, wl.catalog, opts);
        stats = r.stats;
        benchmark::DoNotOptimize(r.forest.nodes.data());
    }
    set_counters(state, stats);
}

void BM_Label(benchmark::State &state)
{
    const auto wl = ppf::generate(scaled(state.range(0), state.range(1)));
    ppf::BuildOptions opts;
    opts.limit = wl.num_plans;
    opts.prune = false;   // label the whole candidate space, faults included
    const auto r = ppf::build(wl.spec, wl.catalog, opts);
    for (auto _ : state) {
        auto labels = ppf::label(r.forest, wl.catalog);
        benchmark::DoNotOptimize(labels.alive.data());
    }
    state.counters["forest_nodes"] = static_cast<double>(r.forest.size());
}

void BM_NaiveBaseline(benchmark::State &state)
{
    const auto wl = ppf::generate(scaled(state.range(0), state.range(1)));
    std::vector<ppf::Plan> candidates;
    for (auto &c : ppf::expand(wl.spec, wl.num_plans))
        candidates.push_back(std::move(c.plan));
    for (auto _ : state)
        benchmark::DoNotOptimize(ppf::baseline_naive(candidates, wl.catalog));
}

void BM_RunScenario(benchmark::State &state)
{
    const auto cfg = scaled(state.range(0), state.range(1));
    ppf::SizeStats stats;
    for (auto _ : state)
        stats = ppf::run_scenario(cfg).stats;
    set_counters(state, stats);
}

void sizes(benchmark::internal::Benchmark *b)
{
    b->Args({100, 25})->Args({300, 25})->Args({1000, 25})->Args({1000, 50})->Unit(benchmark::kMillisecond);
}

}

BENCHMARK(BM_Generate)->Apply(sizes);
BENCHMARK(BM_Build)->Apply(sizes);
BENCHMARK(BM_Label)->Apply(sizes);
BENCHMARK(BM_NaiveBaseline)->Apply(sizes);
BENCHMARK(BM_RunScenario)->Apply(sizes);

BENCHMARK_MAIN();
