#include <benchmark/benchmark.h>

#include "deepi2i/nn.h"
#include "deepi2i/networks.h"
#include "deepi2i/rng.h"

using namespace deepi2i;

static void BM_ConvForward(benchmark::State& state) {
  const int64_t ch = state.range(0), spatial = state.range(1);
  Rng rng(1);
  nn::Conv2d<float> conv(ch, ch, 3, true);
  conv.init(rng);
  Tensor<float> x({32, ch, spatial, spatial});
  rng.fill_normal(x);
  for (auto _ : state) {
    Tensor<float> y = conv.forward(x, nn::kEval);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_ConvForward)->Args({32, 16})->Args({64, 8})->Args({128, 4});

static void BM_ConvBackward(benchmark::State& state) {
  const int64_t ch = state.range(0), spatial = state.range(1);
  Rng rng(1);
  nn::Conv2d<float> conv(ch, ch, 3, true);
  conv.init(rng);
  Tensor<float> x({32, ch, spatial, spatial});
  Tensor<float> gy({32, ch, spatial, spatial});
  rng.fill_normal(x);
  rng.fill_normal(gy);
  for (auto _ : state) {
    conv.forward(x, {true, true, false});
    Tensor<float> gx = conv.backward(gy, true);
    benchmark::DoNotOptimize(gx.data());
  }
}
BENCHMARK(BM_ConvBackward)->Args({32, 16})->Args({64, 8});

static void BM_EncodeBatch(benchmark::State& state) {
  ArchConfig cfg;
  cfg.resolution = 32;
  cfg.base_width = static_cast<int64_t>(state.range(0));
  cfg.num_classes = 8;
  cfg.z_dim = 120;
  cfg.embed_dim = 32;
  cfg.num_taps = 3;
  auto nets = build_networks<float>(cfg, 1);
  Rng rng(2);
  Tensor<float> imgs({32, 3, 32, 32});
  rng.fill_uniform(imgs, -1.0, 1.0);
  for (auto _ : state) {
    auto feats = nets.encoder->encode(imgs, nn::kEval);
    benchmark::DoNotOptimize(feats.feats.data());
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_EncodeBatch)->Arg(8)->Arg(12)->Arg(16);
