#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "deepi2i/errors.h"
#include "deepi2i/tensor.h"

namespace deepi2i {

enum class AdvLossKind { kHinge, kLogistic };

std::string to_string(AdvLossKind kind);
AdvLossKind adv_loss_kind_from_string(const std::string& s);

/// One hierarchical tap: a residual-block output of the encoder /
/// discriminator trunk that feeds the generator. Levels are named so the
/// deepest tap is always 6 (with four taps: 3..6).
struct TapSpec {
  int level = 0;
  int64_t spatial = 0;
  int64_t channels = 0;          // trunk-side channels
  int64_t adapted_channels = 0;  // after the adaptor: doubled except at the deepest level
};

/// Single source of truth for all network shapes.
struct ArchConfig {
  int64_t resolution = 64;   // power of two
  int64_t base_width = 16;   // 96 reproduces the reference 128x128 layout
  int64_t num_classes = 0;
  int64_t z_dim = 120;
  int64_t embed_dim = 128;
  int num_taps = 4;  // clipped to what the resolution allows, min 2
  AdvLossKind adv_loss_kind = AdvLossKind::kHinge;
  bool use_orthogonal_reg = false;
  bool spectral_norm = true;
  int64_t attn_spatial = 0;  // spatial size of the self-attention insert, 0 = off
  double fusion_weight_default = 0.1;
  std::map<int, double> fusion_weight_override;  // per tap level

  double fusion_weight(int level) const;
  void validate() const;

  /// Stable key=value form used by checkpoint manifests and config echoes.
  std::vector<std::pair<std::string, std::string>> to_kv() const;
  static ArchConfig from_kv(const std::map<std::string, std::string>& kv);

  /// True when `other` describes the same backbone (everything except the
  /// class count), which is what weight transfer requires.
  bool compatible_backbone(const ArchConfig& other) const;
};

struct TrunkBlockSpec {
  int64_t in_ch = 0, out_ch = 0;
  bool down = false;
  bool pre_act = true;
  int tap_level = 0;  // 0 = not tapped
  int64_t out_spatial = 0;
};

struct GenBlockSpec {
  int64_t in_ch = 0, out_ch = 0;
  int64_t out_spatial = 0;
  int fuse_level = 0;  // 0 = no fusion at this block output
};

/// Derived topology shared by every network builder.
struct ArchPlan {
  ArchConfig cfg;

  std::vector<TrunkBlockSpec> trunk;  // encoder == discriminator topology
  int trunk_attn_after = -1;          // block index the attention insert follows
  int64_t trunk_out_ch = 0, trunk_out_spatial = 0;

  std::vector<TapSpec> taps;  // ascending level (shallow -> deep)

  int64_t g_init_spatial = 0, g_init_ch = 0;
  int g_init_fuse_level = 0;
  std::vector<GenBlockSpec> gblocks;
  int g_attn_after = -1;

  std::vector<int64_t> z_chunks;  // [0] feeds the initial linear
  int64_t cond_dim = 0;           // embed_dim + per-block chunk

  const TapSpec& tap(int level) const;
  bool has_tap(int level) const;
  int trunk_block_of_tap(int level) const;
  std::vector<int> tap_levels() const;
};

ArchPlan make_plan(const ArchConfig& cfg);

/// Named parameter/buffer shapes for one network role, in visit order,
/// without allocating any parameters. Mirrors the network builders; used by
/// transfer-map construction and full-scale shape checks.
struct NamedShape {
  std::string name;
  Shape shape;
  bool is_buffer = false;
};
std::vector<NamedShape> plan_param_shapes(const ArchPlan& plan, const std::string& role);

}  // namespace deepi2i
