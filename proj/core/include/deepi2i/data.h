#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "deepi2i/image.h"
#include "deepi2i/networks.h"
#include "deepi2i/rng.h"
#include "deepi2i/vocab.h"

namespace deepi2i {

/// Parametric many-class toy dataset: each class is a distinct
/// shape/color/texture family; each sample jitters pose (position, scale,
/// rotation) so "same pose, different class" translation is well-defined.
struct SynthSpec {
  int64_t num_classes = 8;
  int64_t per_class = 200;
  int64_t resolution = 32;
  uint64_t seed = 7;
  int64_t class_offset = 0;  // shifts the family table; disjoint sources/targets

  /// "synth:classes=8,per_class=200,res=32,seed=7,offset=0"
  static SynthSpec parse(const std::string& spec);
  std::string to_string() const;
};

enum class Split { kTrain, kTest };

/// In-memory folder-per-class dataset with a deterministic per-class 90/10
/// train/test split. Copies share image storage.
class DatasetHandle {
 public:
  DatasetHandle() = default;

  static DatasetHandle from_folder(const std::filesystem::path& root, int64_t resolution,
                                   uint64_t split_seed);
  static DatasetHandle synthetic(const SynthSpec& spec);
  /// Dispatches on "synth:..." vs filesystem path.
  static DatasetHandle open(const std::string& dataset_spec, int64_t resolution,
                            uint64_t split_seed);

  const ClassVocabulary& vocab() const { return vocab_; }
  int64_t resolution() const { return resolution_; }
  int64_t num_samples() const;
  int64_t skipped_undecodable() const { return skipped_; }

  const std::vector<int64_t>& indices(Split split) const;
  std::vector<int64_t> indices_of_class(Split split, int64_t cls) const;
  int64_t label_of(int64_t index) const;
  const ImageU8& image_of(int64_t index) const;

  /// Per-class uniform subsample of the train split; test split untouched.
  DatasetHandle subsample(double fraction, uint64_t seed) const;

  /// Writes root/<class>/<index>.png for inspection; layout matches
  /// from_folder expectations.
  void materialize(const std::filesystem::path& root) const;

  /// N x 3 x H x W float batch in [-1, 1] for the given sample indices.
  Tensor<float> batch_images(const std::vector<int64_t>& sample_indices, bool flip_all = false) const;
  std::vector<int64_t> batch_labels(const std::vector<int64_t>& sample_indices) const;

 private:
  struct Storage {
    std::vector<ImageU8> images;
    std::vector<int64_t> labels;
  };
  std::shared_ptr<const Storage> storage_;
  ClassVocabulary vocab_;
  int64_t resolution_ = 0;
  int64_t skipped_ = 0;
  std::vector<int64_t> train_, test_;
};

/// Deterministic batch sequence: a fresh seed-derived permutation per epoch
/// in training mode (short final batch dropped); natural order and a kept
/// final batch in evaluation mode. Optional random horizontal flips.
class BatchStream {
 public:
  BatchStream(const DatasetHandle& dataset, Split split, int64_t batch_size, uint64_t seed,
              bool augment);

  LabeledBatch<float> next();
  int64_t batches_per_epoch() const;

 private:
  void start_epoch();

  const DatasetHandle* dataset_;
  Split split_;
  int64_t batch_size_;
  uint64_t seed_;
  bool augment_;
  int64_t epoch_ = -1;
  size_t cursor_ = 0;
  std::vector<int64_t> order_;
  std::vector<bool> flip_;
};

/// Renders one synthetic sample; exposed for tests.
ImageU8 render_synth_sample(const SynthSpec& spec, int64_t cls, int64_t sample_idx);

}  // namespace deepi2i
