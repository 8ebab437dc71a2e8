// Parallel kernels against their single-threaded references. Thread count
// follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <vector>

#include "smdn/mdn.hpp"
#include "smdn/metrics.hpp"
#include "smdn/stochastic.hpp"

using namespace smdn;

namespace {

const stochastic::GbmScenarioTV& tv_scenario() {
  static const auto s = [] {
    rng::Stream rng{rng::StreamKey(1)};
    return stochastic::sample_scenario_tv_at(stochastic::ScenarioConfig{}, 1.0, 1.0, rng);
  }();
  return s;
}

const stochastic::GbmScenarioLV& lv_scenario() {
  static const auto s = [] {
    rng::Stream rng{rng::StreamKey(2)};
    return stochastic::sample_scenario_lv_at(stochastic::ScenarioConfig{}, 1.0, 1.0, rng);
  }();
  return s;
}

template <bool Parallel, class Scenario>
void simulate(benchmark::State& state, const Scenario& s) {
  const auto paths = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    auto out = Parallel ? stochastic::simulate_terminal_prices(s, paths, rng::StreamKey(3))
                        : stochastic::reference::simulate_terminal_prices(s, paths, rng::StreamKey(3));
    benchmark::DoNotOptimize(out.values.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_SimulateTV(benchmark::State& s) { simulate<true>(s, tv_scenario()); }
void BM_SimulateTVReference(benchmark::State& s) { simulate<false>(s, tv_scenario()); }
void BM_SimulateLV(benchmark::State& s) { simulate<true>(s, lv_scenario()); }
void BM_SimulateLVReference(benchmark::State& s) { simulate<false>(s, lv_scenario()); }
BENCHMARK(BM_SimulateTV)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimulateTVReference)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimulateLV)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimulateLVReference)->Arg(10000)->Unit(benchmark::kMillisecond);

struct Batch {
  mdn::MdnParams params;
  std::vector<double> x, y;
  std::vector<std::size_t> indices;
  mdn::DataView view() const { return {x, y, params.config().input_dim, 30}; }
};

const Batch& batch() {
  static const Batch b = [] {
    mdn::MdnConfig c;
    c.input_dim = 34;
    c.hidden_sizes = {64, 64, 48};
    c.components = 5;
    Batch out{mdn::initialize(c, rng::StreamKey(4)), {}, {}, mdn::all_indices(1000)};
    rng::Stream rng{rng::StreamKey(5)};
    for (std::size_t i = 0; i < 1000 * 34; ++i) out.x.push_back(rng.normal());
    for (std::size_t i = 0; i < 1000 * 30; ++i) out.y.push_back(0.1 * rng.normal());
    return out;
  }();
  return b;
}

template <bool Parallel>
void gradient(benchmark::State& state) {
  const auto& b = batch();
  mdn::Gradients g(b.params.config());
  for (auto _ : state) {
    const double loss = Parallel ? mdn::gradients(b.params, b.view(), b.indices, g)
                                 : mdn::reference::gradients(b.params, b.view(), b.indices, g);
    benchmark::DoNotOptimize(loss);
  }
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(gradient<true>)->Name("BM_Gradients")->Unit(benchmark::kMillisecond);
BENCHMARK(gradient<false>)->Name("BM_GradientsReference")->Unit(benchmark::kMillisecond);

template <bool Parallel>
void kde(benchmark::State& state) {
  rng::Stream rng{rng::StreamKey(6)};
  std::vector<double> samples(static_cast<std::size_t>(state.range(0)));
  for (auto& v : samples) v = 0.2 * rng.normal();
  const double h = metrics::silverman_bandwidth(samples);
  const auto grid = metrics::kde_support(samples, h);
  for (auto _ : state) {
    auto d = Parallel ? metrics::kde(samples, grid, h) : metrics::reference::kde(samples, grid, h);
    benchmark::DoNotOptimize(d.values.data());
  }
}
BENCHMARK(kde<true>)->Name("BM_Kde")->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(kde<false>)->Name("BM_KdeReference")->Arg(100000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
