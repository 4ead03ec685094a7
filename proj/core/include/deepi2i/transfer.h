#pragma once

#include <string>
#include <vector>

#include "deepi2i/checkpoint.h"
#include "deepi2i/networks.h"

namespace deepi2i {

/// Per-network enable switches for pretrained-GAN initialization.
struct TransferFlags {
  bool encoder = true;
  bool generator = true;
  bool discriminator = true;

  static TransferFlags none() { return {false, false, false}; }
  static TransferFlags all() { return {true, true, true}; }
  /// Parses "enc,gen,dis" subsets; empty string = none.
  static TransferFlags parse(const std::string& spec);
  std::string to_string() const;
};

struct TransferEntry {
  std::string source_network;  // generator | discriminator (in the source GAN)
  std::string source_name;
  std::string target_network;  // encoder | generator | discriminator
  std::string target_name;
  Shape shape;
};

struct TransferSkip {
  std::string source_network;
  std::string source_name;
  std::string target_network;
  std::string reason;
};

struct TransferMap {
  std::vector<TransferEntry> entries;
  std::vector<TransferSkip> skipped;
  TransferFlags flags;

  int64_t mapped_count(const std::string& target_network) const;
};

/// Builds the source-to-target correspondence:
///   pretrained discriminator trunk -> encoder and discriminator trunk,
///   pretrained discriminator head  -> discriminator head only,
///   pretrained generator           -> generator,
///   class embeddings               -> skipped when the class counts differ,
///   adaptors                       -> never mapped (no pretrained source).
TransferMap build_transfer_map(const Checkpoint& pretrained, const ArchConfig& target_cfg,
                               const TransferFlags& flags);

/// Copies every mapped source value into the target networks, exactly.
void apply_transfer(const TransferMap& map, const Checkpoint& pretrained, Networks<float>& nets);

/// Two-phase schedule: phase 1 trains adaptors + discriminator; phase 2
/// everything except the encoder, which is never trainable.
struct FreezePolicy {
  int phase = 1;
  std::vector<std::string> trainable;

  bool is_trainable(const std::string& role) const;
};

FreezePolicy freeze_policy(int phase);

}  // namespace deepi2i
