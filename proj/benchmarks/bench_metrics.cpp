#include <benchmark/benchmark.h>

#include "deepi2i/metrics.h"

using namespace deepi2i;

static void BM_Fid(benchmark::State& state) {
  const int64_t n = state.range(0), d = state.range(1);
  Rng rng(3);
  FeatureSet a{Tensor<float>({n, d}), "b"}, b{Tensor<float>({n, d}), "b"};
  rng.fill_normal(a.feats);
  rng.fill_normal(b.feats, 0.5, 1.1);
  for (auto _ : state) benchmark::DoNotOptimize(fid(a, b));
}
BENCHMARK(BM_Fid)->Args({64, 64})->Args({256, 64})->Args({256, 256});

static void BM_Kid(benchmark::State& state) {
  const int64_t n = state.range(0);
  Rng rng(3);
  FeatureSet a{Tensor<float>({n, 64}), "b"}, b{Tensor<float>({n, 64}), "b"};
  rng.fill_normal(a.feats);
  rng.fill_normal(b.feats);
  for (auto _ : state) benchmark::DoNotOptimize(kid(a, b));
}
BENCHMARK(BM_Kid)->Arg(64)->Arg(256);

static void BM_EmbedderExtract(benchmark::State& state) {
  ConvEmbedder emb(32, 16, 64, 1234);
  Rng rng(4);
  Tensor<float> images({64, 3, 32, 32});
  rng.fill_uniform(images, -1.0, 1.0);
  for (auto _ : state) {
    FeatureSet f = emb.extract(images);
    benchmark::DoNotOptimize(f.feats.data());
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_EmbedderExtract);
