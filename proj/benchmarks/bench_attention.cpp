#include <benchmark/benchmark.h>

#include "mgstc/attention.hpp"
#include "mgstc/model.hpp"
#include "mgstc/rng.hpp"

namespace {

using namespace mgstc;

ModelConfig spatial_config(std::size_t n) {
  ModelConfig cfg;
  cfg.n_series = n;
  cfg.chunking = {16, 8, 4, 64};
  cfg.horizon = 2;
  cfg.heads = 8;
  cfg.aggregators = 10;
  return cfg;
}

Tensor random_tokens(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = rng.normal();
  return Tensor::matrix(rows, cols, std::move(v));
}

void BM_FgsaForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto cfg = spatial_config(n);
  Model model(cfg, 1);
  const Tensor tokens = random_tokens(n, cfg.d_model(), 2);
  NoGradGuard guard;
  reset_attention_flops();
  for (auto _ : state) benchmark::DoNotOptimize(fgsa_forward(tokens, model.state(), cfg, 1, n));
  state.counters["attn_flops"] =
      benchmark::Counter(static_cast<double>(attention_flops()) / static_cast<double>(state.iterations()));
}

void BM_FullSpatialAttention(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto cfg = spatial_config(n);
  Model model(cfg, 1);
  const Tensor tokens = random_tokens(n, cfg.d_model(), 2);
  NoGradGuard guard;
  reset_attention_flops();
  for (auto _ : state)
    benchmark::DoNotOptimize(full_spatial_attention(tokens, model.state().spatial_gather, 1, n, cfg.heads));
  state.counters["attn_flops"] =
      benchmark::Counter(static_cast<double>(attention_flops()) / static_cast<double>(state.iterations()));
}

}  // namespace

BENCHMARK(BM_FgsaForward)->RangeMultiplier(2)->Range(64, 512)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_FullSpatialAttention)->RangeMultiplier(2)->Range(64, 512)->Unit(benchmark::kMicrosecond);
