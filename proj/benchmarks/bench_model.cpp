#include <benchmark/benchmark.h>

#include "mgstc/adam.hpp"
#include "mgstc/frame.hpp"
#include "mgstc/model.hpp"
#include "mgstc/synth.hpp"

namespace {

using namespace mgstc;

struct DeskSetup {
  TrafficFrame frame;
  ModelConfig config;

  explicit DeskSetup(bool use_fgsa) {
    SynthConfig sc;
    sc.n_series = 8;
    sc.length = 400;
    frame = synth_stream(sc, 3);
    config.n_series = sc.n_series;
    config.chunking = {48, 12, 8, 64};
    config.horizon = 8;
    config.heads = 4;
    config.aggregators = 10;
    config.use_fgsa = use_fgsa;
  }
};

void BM_ModelForward(benchmark::State& state) {
  DeskSetup setup(state.range(1) != 0);
  Model model(setup.config, 0);
  WindowRange windows(setup.frame, 48, 8);
  const auto batch = windows.batch(0, static_cast<std::size_t>(state.range(0)));
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_TrainStep(benchmark::State& state) {
  DeskSetup setup(true);
  Model model(setup.config, 0);
  Adam adam(model.parameters(), AdamConfig{1e-3});
  WindowRange windows(setup.frame, 48, 8);
  const auto batch = windows.batch(0, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    Tensor loss = model.loss(batch);
    loss.backward();
    adam.step();
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_ModelForward)->ArgsProduct({{1, 16, 64}, {0, 1}})->ArgNames({"batch", "fgsa"})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainStep)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
