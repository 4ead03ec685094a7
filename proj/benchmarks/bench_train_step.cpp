#include <benchmark/benchmark.h>

#include "deepi2i/train.h"

using namespace deepi2i;

static void BM_TrainStep(benchmark::State& state) {
  ArchConfig arch;
  arch.resolution = 32;
  arch.base_width = static_cast<int64_t>(state.range(0));
  arch.num_classes = 8;
  arch.z_dim = 120;
  arch.embed_dim = 32;
  arch.num_taps = 3;

  SynthSpec spec;
  spec.num_classes = 8;
  spec.per_class = 40;
  spec.resolution = 32;
  auto data = DatasetHandle::synthetic(spec);

  TrainConfig cfg;
  cfg.total_iterations = 1000;
  cfg.phase1_iterations = 0;
  cfg.batch_size = state.range(1);
  cfg.log_every = 0;
  TrainEngine engine(cfg, build_networks<float>(arch, 1));
  BatchStream real(data, Split::kTrain, cfg.batch_size, 1, false);
  BatchStream source(data, Split::kTrain, cfg.batch_size, 2, false);

  for (auto _ : state) {
    LossReport report = engine.train_step(real.next(), source.next());
    benchmark::DoNotOptimize(report.total_g);
  }
  state.SetItemsProcessed(state.iterations() * cfg.batch_size);
}
BENCHMARK(BM_TrainStep)->Args({10, 32})->Args({12, 32})->Unit(benchmark::kMillisecond);
