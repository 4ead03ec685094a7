#include "deepi2i/arch.h"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace deepi2i {

std::string to_string(AdvLossKind kind) {
  return kind == AdvLossKind::kHinge ? "hinge" : "logistic";
}

AdvLossKind adv_loss_kind_from_string(const std::string& s) {
  if (s == "hinge") return AdvLossKind::kHinge;
  if (s == "logistic") return AdvLossKind::kLogistic;
  throw ConfigError("unknown adversarial loss kind '" + s + "' (hinge|logistic)");
}

namespace {

bool is_pow2(int64_t v) { return v > 0 && (v & (v - 1)) == 0; }

int64_t ilog2(int64_t v) {
  int64_t r = 0;
  while (v > 1) {
    v >>= 1;
    ++r;
  }
  return r;
}

}  // namespace

double ArchConfig::fusion_weight(int level) const {
  auto it = fusion_weight_override.find(level);
  return it == fusion_weight_override.end() ? fusion_weight_default : it->second;
}

void ArchConfig::validate() const {
  if (!is_pow2(resolution)) throw ConfigError("resolution must be a power of two");
  if (resolution < 4) throw ConfigError("resolution too small (minimum 4)");
  if (base_width < 1) throw ConfigError("base_width must be positive");
  if (num_classes < 1) throw ConfigError("num_classes must be positive");
  if (z_dim < 1) throw ConfigError("z_dim must be positive");
  if (embed_dim < 1) throw ConfigError("embed_dim must be positive");
  if (num_taps < 2) throw ConfigError("at least two tap levels are required");
  if (attn_spatial != 0 && !is_pow2(attn_spatial))
    throw ConfigError("attn_spatial must be a power of two (or 0)");
  // resolution must leave room for the hierarchy: the smallest tap sits at
  // resolution >> depth, and the image must be at least 4x that tap.
  const int64_t depth = std::min<int64_t>(num_taps + 1, ilog2(resolution));
  if (resolution >> depth < 1 || resolution < 4 * (resolution >> depth))
    throw ConfigError("resolution " + std::to_string(resolution) +
                      " is below 4x the smallest tap");
}

std::vector<std::pair<std::string, std::string>> ArchConfig::to_kv() const {
  std::vector<std::pair<std::string, std::string>> kv;
  auto add = [&](const std::string& k, const std::string& v) { kv.emplace_back(k, v); };
  add("arch.resolution", std::to_string(resolution));
  add("arch.base_width", std::to_string(base_width));
  add("arch.num_classes", std::to_string(num_classes));
  add("arch.z_dim", std::to_string(z_dim));
  add("arch.embed_dim", std::to_string(embed_dim));
  add("arch.num_taps", std::to_string(num_taps));
  add("arch.adv_loss", to_string(adv_loss_kind));
  add("arch.orthogonal_reg", use_orthogonal_reg ? "1" : "0");
  add("arch.spectral_norm", spectral_norm ? "1" : "0");
  add("arch.attn_spatial", std::to_string(attn_spatial));
  {
    std::ostringstream os;
    os << fusion_weight_default;
    add("arch.fusion_weight", os.str());
  }
  for (const auto& [level, w] : fusion_weight_override) {
    std::ostringstream os;
    os << w;
    add("arch.fusion_weight." + std::to_string(level), os.str());
  }
  return kv;
}

ArchConfig ArchConfig::from_kv(const std::map<std::string, std::string>& kv) {
  ArchConfig cfg;
  auto geti = [&](const std::string& k, int64_t dflt) {
    auto it = kv.find(k);
    return it == kv.end() ? dflt : std::stoll(it->second);
  };
  auto getd = [&](const std::string& k, double dflt) {
    auto it = kv.find(k);
    return it == kv.end() ? dflt : std::stod(it->second);
  };
  cfg.resolution = geti("arch.resolution", cfg.resolution);
  cfg.base_width = geti("arch.base_width", cfg.base_width);
  cfg.num_classes = geti("arch.num_classes", cfg.num_classes);
  cfg.z_dim = geti("arch.z_dim", cfg.z_dim);
  cfg.embed_dim = geti("arch.embed_dim", cfg.embed_dim);
  cfg.num_taps = static_cast<int>(geti("arch.num_taps", cfg.num_taps));
  if (auto it = kv.find("arch.adv_loss"); it != kv.end())
    cfg.adv_loss_kind = adv_loss_kind_from_string(it->second);
  cfg.use_orthogonal_reg = geti("arch.orthogonal_reg", 0) != 0;
  cfg.spectral_norm = geti("arch.spectral_norm", 1) != 0;
  cfg.attn_spatial = geti("arch.attn_spatial", cfg.attn_spatial);
  cfg.fusion_weight_default = getd("arch.fusion_weight", cfg.fusion_weight_default);
  for (const auto& [k, v] : kv) {
    const std::string pre = "arch.fusion_weight.";
    if (k.rfind(pre, 0) == 0) cfg.fusion_weight_override[std::stoi(k.substr(pre.size()))] = std::stod(v);
  }
  return cfg;
}

bool ArchConfig::compatible_backbone(const ArchConfig& other) const {
  return resolution == other.resolution && base_width == other.base_width &&
         z_dim == other.z_dim && embed_dim == other.embed_dim && num_taps == other.num_taps &&
         spectral_norm == other.spectral_norm && attn_spatial == other.attn_spatial;
}

const TapSpec& ArchPlan::tap(int level) const {
  for (const auto& t : taps)
    if (t.level == level) return t;
  throw ConfigError("no tap at level " + std::to_string(level));
}

bool ArchPlan::has_tap(int level) const {
  for (const auto& t : taps)
    if (t.level == level) return true;
  return false;
}

int ArchPlan::trunk_block_of_tap(int level) const {
  for (size_t j = 0; j < trunk.size(); ++j)
    if (trunk[j].tap_level == level) return static_cast<int>(j);
  throw ConfigError("no trunk block for tap level " + std::to_string(level));
}

std::vector<int> ArchPlan::tap_levels() const {
  std::vector<int> ls;
  for (const auto& t : taps) ls.push_back(t.level);
  return ls;
}

ArchPlan make_plan(const ArchConfig& cfg) {
  cfg.validate();
  ArchPlan plan;
  plan.cfg = cfg;

  const int64_t res = cfg.resolution, w = cfg.base_width;
  // depth = number of downsampling trunk blocks; deepest activation at res >> depth
  const int64_t depth = std::min<int64_t>(cfg.num_taps + 1, ilog2(res));
  const int num_taps = static_cast<int>(std::min<int64_t>(cfg.num_taps, depth));
  if (num_taps < 2) throw ConfigError("resolution too small for two tap levels");

  // trunk: `depth` downsampling blocks (channels double each time), then one
  // block at constant width and spatial size
  for (int64_t j = 0; j < depth; ++j) {
    TrunkBlockSpec b;
    b.in_ch = j == 0 ? 3 : w << (j - 1);
    b.out_ch = w << j;
    b.down = true;
    b.pre_act = j != 0;
    b.out_spatial = res >> (j + 1);
    plan.trunk.push_back(b);
  }
  plan.trunk.push_back({w << (depth - 1), w << (depth - 1), false, true, 0, res >> depth});
  plan.trunk_out_ch = w << (depth - 1);
  plan.trunk_out_spatial = res >> depth;

  // taps: the deepest level (6) reads the final constant block; shallower
  // levels read downsampling-block outputs, one octave apart
  const int deepest = 6;
  plan.trunk.back().tap_level = deepest;
  for (int i = 1; i < num_taps; ++i) {
    const int level = deepest - i;
    const int64_t block = depth - 1 - i;
    plan.trunk[static_cast<size_t>(block)].tap_level = level;
  }
  for (const auto& b : plan.trunk) {
    if (!b.tap_level) continue;
    TapSpec t;
    t.level = b.tap_level;
    t.spatial = b.out_spatial;
    t.channels = b.out_ch;
    t.adapted_channels = b.tap_level == deepest ? b.out_ch : 2 * b.out_ch;
    plan.taps.push_back(t);
  }
  std::sort(plan.taps.begin(), plan.taps.end(),
            [](const TapSpec& a, const TapSpec& b) { return a.level < b.level; });

  // generator mirrors the trunk: start at the deepest spatial size, upsample
  // back to full resolution; channel count at spatial s is w * res / s capped
  // at the trunk output width
  plan.g_init_spatial = res >> depth;
  plan.g_init_ch = plan.trunk_out_ch;
  plan.g_init_fuse_level = deepest;
  auto g_ch = [&](int64_t s) { return std::min<int64_t>(w * res / s, plan.trunk_out_ch); };
  int64_t cur_ch = plan.g_init_ch;
  for (int64_t s = plan.g_init_spatial * 2; s <= res; s *= 2) {
    GenBlockSpec b;
    b.in_ch = cur_ch;
    b.out_ch = g_ch(s);
    b.out_spatial = s;
    for (const auto& t : plan.taps)
      if (t.level != deepest && t.spatial == s) b.fuse_level = t.level;
    plan.gblocks.push_back(b);
    cur_ch = b.out_ch;
  }

  // attention insert position (same spatial size in trunk and generator)
  if (cfg.attn_spatial > 0) {
    plan.trunk_attn_after = -1;
    for (size_t j = 0; j < plan.trunk.size(); ++j)
      if (plan.trunk[j].down && plan.trunk[j].out_spatial == cfg.attn_spatial)
        plan.trunk_attn_after = static_cast<int>(j);
    plan.g_attn_after = -1;
    for (size_t j = 0; j < plan.gblocks.size(); ++j)
      if (plan.gblocks[j].out_spatial == cfg.attn_spatial) plan.g_attn_after = static_cast<int>(j);
    if (plan.trunk_attn_after < 0 || plan.g_attn_after < 0)
      throw ConfigError("attn_spatial " + std::to_string(cfg.attn_spatial) +
                        " matches no block output");
  }

  // noise chunks: one per generator block plus one for the initial linear
  const int64_t n_chunks = static_cast<int64_t>(plan.gblocks.size()) + 1;
  const int64_t chunk = cfg.z_dim / n_chunks;
  if (chunk < 1)
    throw ConfigError("z_dim " + std::to_string(cfg.z_dim) + " too small for " +
                      std::to_string(n_chunks) + " chunks");
  plan.z_chunks.assign(static_cast<size_t>(n_chunks), chunk);
  plan.z_chunks[0] += cfg.z_dim - chunk * n_chunks;
  plan.cond_dim = cfg.embed_dim + chunk;

  // invariants forced by construction; checked here as a guard
  for (size_t i = 1; i < plan.taps.size(); ++i) {
    const auto& shallow = plan.taps[i - 1];
    const auto& deep = plan.taps[i];
    if (deep.spatial * 2 != shallow.spatial || deep.channels != 2 * shallow.channels)
      throw ConfigError("tap pyramid violates halving/doubling");
  }
  return plan;
}

// ---- parameter shape enumeration (mirrors the network builders) ----

namespace {

struct ShapeSink {
  std::vector<NamedShape>* out;
  void param(const std::string& name, Shape shape) { out->push_back({name, std::move(shape), false}); }
  void buffer(const std::string& name, Shape shape) { out->push_back({name, std::move(shape), true}); }
};

void conv_shapes(ShapeSink& s, const std::string& p, int64_t in_ch, int64_t out_ch, int64_t k,
                 bool sn) {
  s.param(p + "weight", {out_ch, in_ch * k * k});
  s.param(p + "bias", {out_ch});
  if (sn) s.buffer(p + "sn_u", {out_ch});
}

void linear_shapes(ShapeSink& s, const std::string& p, int64_t in, int64_t out, bool bias,
                   bool sn) {
  s.param(p + "weight", {out, in});
  if (bias) s.param(p + "bias", {out});
  if (sn) s.buffer(p + "sn_u", {out});
}

void cbn_shapes(ShapeSink& s, const std::string& p, int64_t ch, int64_t cond_dim) {
  linear_shapes(s, p + "gain.", cond_dim, ch, false, false);
  linear_shapes(s, p + "bias.", cond_dim, ch, false, false);
  s.buffer(p + "running_mean", {ch});
  s.buffer(p + "running_var", {ch});
}

void attn_shapes(ShapeSink& s, const std::string& p, int64_t ch, bool sn) {
  const int64_t qk = std::max<int64_t>(ch / 8, 1), v = std::max<int64_t>(ch / 2, 1);
  conv_shapes(s, p + "theta.", ch, qk, 1, sn);
  conv_shapes(s, p + "phi.", ch, qk, 1, sn);
  conv_shapes(s, p + "g.", ch, v, 1, sn);
  conv_shapes(s, p + "out.", v, ch, 1, sn);
  s.param(p + "gamma", {1});
}

void dblock_shapes(ShapeSink& s, const std::string& p, const TrunkBlockSpec& b, bool sn) {
  conv_shapes(s, p + "conv1.", b.in_ch, b.out_ch, 3, sn);
  conv_shapes(s, p + "conv2.", b.out_ch, b.out_ch, 3, sn);
  if (b.in_ch != b.out_ch || b.down) conv_shapes(s, p + "conv_sc.", b.in_ch, b.out_ch, 1, sn);
}

void trunk_shapes(ShapeSink& s, const ArchPlan& plan) {
  const bool sn = plan.cfg.spectral_norm;
  for (size_t j = 0; j < plan.trunk.size(); ++j) {
    dblock_shapes(s, "trunk.block" + std::to_string(j) + ".", plan.trunk[j], sn);
    if (static_cast<int>(j) == plan.trunk_attn_after)
      attn_shapes(s, "trunk.attn.", plan.trunk[j].out_ch, sn);
  }
}

}  // namespace

std::vector<NamedShape> plan_param_shapes(const ArchPlan& plan, const std::string& role) {
  std::vector<NamedShape> out;
  ShapeSink s{&out};
  const bool sn = plan.cfg.spectral_norm;
  if (role == "encoder") {
    trunk_shapes(s, plan);
  } else if (role == "discriminator") {
    trunk_shapes(s, plan);
    linear_shapes(s, "head.linear.", plan.trunk_out_ch, 1, true, sn);
    s.param("head.embed.weight", {plan.cfg.num_classes, plan.trunk_out_ch});
  } else if (role == "generator") {
    s.param("embed.weight", {plan.cfg.num_classes, plan.cfg.embed_dim});
    linear_shapes(s, "linear.", plan.z_chunks[0],
                  plan.g_init_ch * plan.g_init_spatial * plan.g_init_spatial, true, sn);
    for (size_t j = 0; j < plan.gblocks.size(); ++j) {
      const auto& b = plan.gblocks[j];
      const std::string p = "block" + std::to_string(j) + ".";
      cbn_shapes(s, p + "cbn1.", b.in_ch, plan.cond_dim);
      cbn_shapes(s, p + "cbn2.", b.out_ch, plan.cond_dim);
      conv_shapes(s, p + "conv1.", b.in_ch, b.out_ch, 3, sn);
      conv_shapes(s, p + "conv2.", b.out_ch, b.out_ch, 3, sn);
      conv_shapes(s, p + "conv_sc.", b.in_ch, b.out_ch, 1, sn);
      if (static_cast<int>(j) == plan.g_attn_after) attn_shapes(s, "attn.", b.out_ch, sn);
    }
    s.param("final_bn.gamma", {plan.gblocks.back().out_ch});
    s.param("final_bn.beta", {plan.gblocks.back().out_ch});
    s.buffer("final_bn.running_mean", {plan.gblocks.back().out_ch});
    s.buffer("final_bn.running_var", {plan.gblocks.back().out_ch});
    conv_shapes(s, "final_conv.", plan.gblocks.back().out_ch, 3, 3, sn);
  } else if (role == "adaptors") {
    for (const auto& t : plan.taps) {
      const std::string p = "level" + std::to_string(t.level) + ".";
      if (t.level == 6) {
        conv_shapes(s, p + "conv1.", t.channels, t.channels, 3, false);
        conv_shapes(s, p + "conv2.", t.channels, t.channels, 3, false);
      } else {
        conv_shapes(s, p + "conv1.", t.channels, t.adapted_channels, 3, false);
        conv_shapes(s, p + "conv2.", t.adapted_channels, t.adapted_channels, 3, false);
        conv_shapes(s, p + "conv3.", t.adapted_channels, t.adapted_channels, 1, false);
      }
    }
  } else {
    throw ConfigError("unknown network role '" + role + "'");
  }
  return out;
}

}  // namespace deepi2i
