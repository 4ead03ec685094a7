#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "deepi2i/checkpoint.h"
#include "deepi2i/data.h"
#include "deepi2i/losses.h"
#include "deepi2i/networks.h"
#include "deepi2i/optim.h"
#include "deepi2i/transfer.h"

namespace deepi2i {

struct TrainConfig {
  int64_t total_iterations = 1000;
  int64_t phase1_iterations = -1;  // -1: 10% of total
  int64_t batch_size = 32;
  double lr_generator = 1e-4;
  double lr_other = 4e-4;  // encoder (nominal), adaptors, discriminator
  double beta1 = 0.0;
  double beta2 = 0.999;
  int d_steps_per_g_step = 1;
  double ema_decay = 0.9999;  // 0 disables averaging
  bool ema_ramp = true;       // min(decay, (t+1)/(t+10)) warmup
  uint64_t seed = 1;
  int64_t checkpoint_every = 0;  // 0: final only
  int64_t log_every = 10;
  int64_t eval_every = 0;  // 0: no metric snapshots
  int64_t eval_n_gen_per_class = 64;
  uint64_t eval_seed = 9999;  // shared across runs so curves are comparable
  double grad_clip = 0.0;
  bool augment = false;
  LossConfig loss;

  int64_t resolved_phase1() const;
  void validate() const;
};

struct TrainLogRow {
  int64_t iteration = 0;
  int phase = 1;
  LossReport losses;
  double lr_generator = 0, lr_other = 0;
  double wall_seconds = 0;
};

/// One optimization step at a time over a Networks bundle. Conditional-GAN
/// mode (no encoder/adaptors) trains the generator from iteration 0 and
/// skips reconstruction.
class TrainEngine {
 public:
  TrainEngine(const TrainConfig& cfg, Networks<float> nets);

  /// One discriminator update followed by one generator-side update on the
  /// given batches. Throws DivergenceError on non-finite losses.
  LossReport train_step(const LabeledBatch<float>& real, const LabeledBatch<float>& source);
  /// Extra discriminator-only update (d_steps_per_g_step > 1).
  void discriminator_step(const LabeledBatch<float>& real, const LabeledBatch<float>& source);

  int64_t iteration() const { return iter_; }
  int phase() const { return phase_; }
  const TrainConfig& config() const { return cfg_; }
  Networks<float>& nets() { return nets_; }
  const Networks<float>& nets() const { return nets_; }
  Rng& rng() { return rng_; }

  bool has_ema() const { return !ema_.arrays.empty(); }
  const NamedArrays& ema() const { return ema_; }
  /// Builds a generator whose parameters are the averaged weights (buffers
  /// copied from the live generator).
  Generator<float> ema_generator() const;

 private:
  void advance_phase_if_needed();
  Tensor<float> forward_translate(const Tensor<float>& images, const Tensor<float>& z,
                                  const std::vector<int64_t>& labels, bool for_update,
                                  HierarchicalFeatures<float>* adapted_out);
  void update_ema();

  TrainConfig cfg_;
  Networks<float> nets_;
  NamedArrays ema_;
  Adam<float> adam_gen_, adam_dis_, adam_ada_;
  FreezePolicy policy_;
  int64_t iter_ = 0;
  int phase_ = 0;
  int64_t ema_updates_ = 0;
  double last_adv_d_ = 0;
  Rng rng_;
};

struct RunResult {
  Checkpoint final_checkpoint;
  std::filesystem::path checkpoint_file;
  std::vector<TrainLogRow> log;
  // (iteration, mFID) series collected from metric snapshots
  std::vector<std::pair<int64_t, double>> mfid_series;
};

/// Full two-phase run: optional transfer init, batch streams, CSV log,
/// snapshots and checkpoints under out_dir. The snapshot hook receives the
/// engine and returns the mFID to record (or NaN to record nothing).
using SnapshotHook = std::function<double(TrainEngine&, int64_t iteration)>;

RunResult run_training(const ArchConfig& arch, const TrainConfig& cfg,
                       const DatasetHandle& dataset, const Checkpoint* pretrained,
                       const TransferFlags& flags, const std::filesystem::path& out_dir,
                       const BuildOptions& build_opts = {},
                       const SnapshotHook& snapshot = nullptr);

}  // namespace deepi2i
