#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "deepi2i/metrics.h"
#include "deepi2i/networks.h"
#include "deepi2i/train.h"
#include "deepi2i/transfer.h"

namespace deepi2i {

/// Flat key=value configuration ('#' comments, sections by key prefix).
/// Serialization is sorted by key, so echoes are byte-stable.
class KvConfig {
 public:
  KvConfig() = default;

  static KvConfig parse_file(const std::filesystem::path& file);
  static KvConfig parse_string(const std::string& text);

  void set(const std::string& key, const std::string& value) { kv_[key] = value; }
  bool has(const std::string& key) const { return kv_.count(key) != 0; }
  const std::string& require(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& dflt) const;
  int64_t get_int(const std::string& key, int64_t dflt) const;
  double get_double(const std::string& key, double dflt) const;
  uint64_t get_u64(const std::string& key, uint64_t dflt) const;
  bool get_bool(const std::string& key, bool dflt) const;

  void merge(const KvConfig& overrides);
  const std::map<std::string, std::string>& entries() const { return kv_; }
  std::string serialize() const;

 private:
  std::map<std::string, std::string> kv_;
};

/// Fully resolved per-command configuration. An echo of the resolved config
/// is written to the output directory before any work; re-running a command
/// from its echo reproduces outputs byte-exactly.
struct RunConfig {
  std::string command;
  uint64_t seed = 1;
  std::string out = "runs/out";

  // data
  std::string dataset;  // "synth:..." or a folder path
  double data_fraction = 1.0;
  uint64_t data_fraction_seed = 77;
  uint64_t split_seed = 1234;
  std::string materialize_dir;

  ArchConfig arch;
  TrainConfig train;  // carries LossConfig

  // adaptors
  AdaptorMode adaptor_mode = AdaptorMode::kLearned;
  std::vector<int> adaptor_levels;  // empty: all tap levels

  // transfer
  std::string pretrained_path;
  TransferFlags transfer_flags = TransferFlags::all();
  bool scratch = false;

  // evaluation / inference
  std::string checkpoint_path;
  int64_t n_gen_per_class = 64;
  bool rcfc = true;
  bool use_ema = true;
  int64_t extractor_width = 16;
  int64_t extractor_dim = 64;
  uint64_t extractor_seed = 1234;
  ClassifierCfg classifier;

  // command-specific
  std::string input_path;
  std::string classes = "all";
  int64_t n_samples = 2;
  std::string class_a, class_b;
  int64_t steps = 8;
  std::string sweep = "baseline";

  static RunConfig from_kv(const KvConfig& kv);
  KvConfig to_kv() const;
  /// Writes <out>/config_echo.cfg.
  std::filesystem::path write_echo() const;

  DatasetHandle open_dataset() const;
  BuildOptions build_options() const;
  ConvEmbedder make_embedder() const;
};

}  // namespace deepi2i
