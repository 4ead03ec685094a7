#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "deepi2i/metrics.h"
#include "deepi2i/runconfig.h"

namespace deepi2i::cli {

/// Entry point used by the binary; args exclude the program name.
/// Commands: pretrain, train, translate, interpolate, evaluate, ablate.
int run(const std::vector<std::string>& args);

/// The individual commands, callable in-process. Each writes the resolved
/// config echo into cfg.out before doing any work.
std::filesystem::path cmd_pretrain(const RunConfig& cfg);    // -> checkpoint file
std::filesystem::path cmd_train(const RunConfig& cfg);       // -> checkpoint file
std::vector<std::filesystem::path> cmd_translate(const RunConfig& cfg);  // -> written images
std::vector<std::filesystem::path> cmd_interpolate(const RunConfig& cfg);
MetricReport cmd_evaluate(const RunConfig& cfg);
std::filesystem::path cmd_ablate(const RunConfig& cfg);      // -> summary csv

/// Target-class translation behind a loaded checkpoint (averaged generator
/// when present and enabled). Exposed for evaluation drivers.
class CheckpointTranslator final : public Translator {
 public:
  CheckpointTranslator(const Checkpoint& ckpt, bool use_ema);
  Tensor<float> translate(const Tensor<float>& sources, int64_t target_class,
                          Rng& rng) const override;
  const ArchPlan& plan() const { return nets_->plan; }
  const ClassVocabulary& vocab() const { return vocab_; }
  /// Translation with caller-supplied noise and explicit embedding rows.
  Tensor<float> translate_with(const Tensor<float>& sources, const Tensor<float>& z,
                               const Tensor<float>& embed_rows) const;
  Tensor<float> translate_with_labels(const Tensor<float>& sources, const Tensor<float>& z,
                                      const std::vector<int64_t>& labels) const;
  Generator<float>& generator() const { return *gen_; }

 private:
  std::shared_ptr<Networks<float>> nets_;
  std::shared_ptr<Generator<float>> gen_;  // averaged or live
  ClassVocabulary vocab_;
};

}  // namespace deepi2i::cli
