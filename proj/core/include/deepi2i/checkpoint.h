#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "deepi2i/arch.h"
#include "deepi2i/networks.h"
#include "deepi2i/tensor.h"
#include "deepi2i/vocab.h"

namespace deepi2i {

/// One network's tensors in visit order (parameters and buffers).
struct NamedArrays {
  std::vector<std::pair<std::string, Tensor<float>>> arrays;

  const Tensor<float>* find(const std::string& name) const;
  Tensor<float>* find(const std::string& name);
};

/// Self-contained training snapshot. Numeric payload is little-endian f32;
/// round-trips are bit-exact.
struct Checkpoint {
  static constexpr uint32_t kVersion = 1;

  uint32_t version = kVersion;
  ArchConfig arch;
  ClassVocabulary vocab;
  int64_t iteration = 0;
  std::string rng_state;
  // adaptor variant, needed to rebuild matching networks on load
  std::string adaptor_mode = "none";  // learned | duplicate | none
  std::vector<int> adaptor_levels;
  // keyed by role: encoder, adaptors, generator, discriminator, generator_ema
  std::map<std::string, NamedArrays> networks;

  bool has_network(const std::string& role) const { return networks.count(role) != 0; }
  /// Options reproducing the stored network structure.
  BuildOptions build_options() const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& file);
Checkpoint load_checkpoint(const std::filesystem::path& file);

/// Capture the current parameter/buffer values of every present network.
Checkpoint snapshot_networks(Networks<float>& nets, const ClassVocabulary& vocab,
                             int64_t iteration, const std::string& rng_state,
                             const NamedArrays* generator_ema = nullptr);

/// Write checkpoint values back into freshly built networks of the same
/// architecture. Throws CheckpointError on any name/shape inconsistency.
void restore_networks(const Checkpoint& ckpt, Networks<float>& nets);

}  // namespace deepi2i
