#include "deepi2i/networks.h"

#include <algorithm>
#include <cstring>

namespace deepi2i {

// ---- HierarchicalFeatures ----

template <typename T>
bool HierarchicalFeatures<T>::has_level(int level) const {
  return std::find(levels.begin(), levels.end(), level) != levels.end();
}

template <typename T>
const Tensor<T>& HierarchicalFeatures<T>::at_level(int level) const {
  for (size_t i = 0; i < levels.size(); ++i)
    if (levels[i] == level) return feats[i];
  throw ShapeError("hierarchical features: missing level " + std::to_string(level));
}

template <typename T>
Tensor<T>& HierarchicalFeatures<T>::at_level(int level) {
  for (size_t i = 0; i < levels.size(); ++i)
    if (levels[i] == level) return feats[i];
  throw ShapeError("hierarchical features: missing level " + std::to_string(level));
}

template <typename T>
int64_t HierarchicalFeatures<T>::batch() const {
  return feats.empty() ? 0 : feats.front().dim(0);
}

template <typename T>
void HierarchicalFeatures<T>::push(int level, Tensor<T> f) {
  if (!feats.empty() && f.dim(0) != batch())
    throw ShapeError("hierarchical features: inconsistent batch size");
  levels.push_back(level);
  feats.push_back(std::move(f));
}

template <typename T>
void LabeledBatch<T>::validate(const ArchConfig& cfg) const {
  if (images.rank() != 4 || images.dim(1) != 3 || images.dim(2) != cfg.resolution ||
      images.dim(3) != cfg.resolution)
    throw ShapeError("batch images must be N x 3 x " + std::to_string(cfg.resolution) + " x " +
                     std::to_string(cfg.resolution) + ", got " + shape_str(images.shape()));
  if (static_cast<int64_t>(labels.size()) != images.dim(0))
    throw ShapeError("batch labels/images size mismatch");
  for (int64_t c : labels)
    if (c < 0 || c >= cfg.num_classes)
      throw ConfigError("label " + std::to_string(c) + " outside [0, " +
                        std::to_string(cfg.num_classes) + ")");
}

template <typename T>
Tensor<T> fuse(const Tensor<T>& gen_activation, const Tensor<T>& adapted, T weight) {
  if (!gen_activation.same_shape(adapted))
    throw ShapeError("fuse: shape mismatch " + shape_str(gen_activation.shape()) + " vs " +
                     shape_str(adapted.shape()));
  if (weight == T(0)) return gen_activation;
  Tensor<T> out = gen_activation;
  out.axpy_(weight, adapted);
  return out;
}

// ---- Trunk ----

template <typename T>
Trunk<T>::Trunk(const ArchPlan& plan) : attn_after_(plan.trunk_attn_after) {
  for (const auto& spec : plan.trunk)
    blocks_.emplace_back(spec.in_ch, spec.out_ch, spec.down, spec.pre_act,
                         plan.cfg.spectral_norm);
  if (attn_after_ >= 0)
    attn_ = nn::SelfAttention2d<T>(plan.trunk[static_cast<size_t>(attn_after_)].out_ch,
                                   plan.cfg.spectral_norm);
}

template <typename T>
void Trunk<T>::init(Rng& rng) {
  for (auto& b : blocks_) b.init(rng);
  if (attn_after_ >= 0) attn_.init(rng);
}

template <typename T>
std::vector<Tensor<T>> Trunk<T>::forward(const Tensor<T>& x, const nn::Pass& pass) {
  std::vector<Tensor<T>> outs;
  outs.reserve(blocks_.size());
  Tensor<T> h = x;
  for (size_t j = 0; j < blocks_.size(); ++j) {
    h = blocks_[j].forward(h, pass);
    if (static_cast<int>(j) == attn_after_) h = attn_.forward(h, pass);
    outs.push_back(h);
  }
  if (pass.grad) {
    out_shapes_.clear();
    for (const auto& o : outs) out_shapes_.push_back(o.shape());
  }
  return outs;
}

template <typename T>
Tensor<T> Trunk<T>::backward(std::vector<Tensor<T>>& d_block_out, bool param_grads) {
  if (d_block_out.size() != blocks_.size())
    throw ShapeError("trunk backward: expected one (possibly empty) grad per block");
  Tensor<T> g;
  for (int j = static_cast<int>(blocks_.size()) - 1; j >= 0; --j) {
    Tensor<T>& inj = d_block_out[static_cast<size_t>(j)];
    if (g.empty()) {
      if (inj.empty())
        g = Tensor<T>(out_shapes_[static_cast<size_t>(j)]);
      else
        g = std::move(inj);
    } else if (!inj.empty()) {
      g.add_(inj);
    }
    if (j == attn_after_) g = attn_.backward(g, param_grads);
    g = blocks_[static_cast<size_t>(j)].backward(g, param_grads);
  }
  return g;
}

template <typename T>
void Trunk<T>::visit(const std::string& prefix, const nn::ParamVisitor<T>& fn) {
  for (size_t j = 0; j < blocks_.size(); ++j) {
    blocks_[j].visit(prefix + "block" + std::to_string(j) + ".", fn);
    if (static_cast<int>(j) == attn_after_) attn_.visit(prefix + "attn.", fn);
  }
}

// ---- Encoder ----

template <typename T>
Encoder<T>::Encoder(const ArchPlan& plan) : plan_(plan), trunk_(plan) {}

template <typename T>
void Encoder<T>::init(Rng& rng) {
  trunk_.init(rng);
}

template <typename T>
HierarchicalFeatures<T> Encoder<T>::encode(const Tensor<T>& images, const nn::Pass& pass) {
  if (images.rank() != 4 || images.dim(1) != 3 || images.dim(2) != plan_.cfg.resolution ||
      images.dim(3) != plan_.cfg.resolution)
    throw ShapeError("encode: expected N x 3 x " + std::to_string(plan_.cfg.resolution) + " x " +
                     std::to_string(plan_.cfg.resolution) + ", got " + shape_str(images.shape()));
  auto outs = trunk_.forward(images, pass);
  HierarchicalFeatures<T> feats;
  feats.source = HierarchicalFeatures<T>::Source::kEncoder;
  for (const auto& t : plan_.taps)
    feats.push(t.level, outs[static_cast<size_t>(plan_.trunk_block_of_tap(t.level))]);
  return feats;
}

template <typename T>
Tensor<T> Encoder<T>::backward(const HierarchicalFeatures<T>& d_feats, bool param_grads) {
  std::vector<Tensor<T>> inj(trunk_.num_blocks());
  for (size_t i = 0; i < d_feats.levels.size(); ++i)
    inj[static_cast<size_t>(plan_.trunk_block_of_tap(d_feats.levels[i]))] = d_feats.feats[i];
  return trunk_.backward(inj, param_grads);
}

template <typename T>
void Encoder<T>::visit(const std::string& prefix, const nn::ParamVisitor<T>& fn) {
  trunk_.visit(prefix + "trunk.", fn);
}

// ---- Discriminator ----

template <typename T>
Discriminator<T>::Discriminator(const ArchPlan& plan)
    : plan_(plan),
      trunk_(plan),
      head_(plan.trunk_out_ch, 1, true, plan.cfg.spectral_norm),
      embed_(plan.cfg.num_classes, plan.trunk_out_ch) {}

template <typename T>
void Discriminator<T>::init(Rng& rng) {
  trunk_.init(rng);
  head_.init(rng);
  embed_.init(rng);
}

template <typename T>
DiscriminatorOutput<T> Discriminator<T>::discriminate(const Tensor<T>& images,
                                                      const std::vector<int64_t>& labels,
                                                      const nn::Pass& pass) {
  if (static_cast<int64_t>(labels.size()) != images.dim(0))
    throw ShapeError("discriminate: labels/images size mismatch");
  auto outs = trunk_.forward(images, pass);
  const Tensor<T>& final_out = outs.back();
  Tensor<T> h = nn::relu(final_out);
  Tensor<T> pooled = nn::global_sum_pool(h);
  Tensor<T> lin = head_.forward(pooled, pass);          // (N, 1)
  Tensor<T> rows = embed_.forward(labels, pass.grad);   // (N, C')

  const int64_t n = pooled.dim(0), d = pooled.dim(1);
  Tensor<T> scores({n});
  for (int64_t i = 0; i < n; ++i) {
    T dot = 0;
    for (int64_t j = 0; j < d; ++j) dot += rows[i * d + j] * pooled[i * d + j];
    scores[i] = lin[i] + dot;
  }

  DiscriminatorOutput<T> out;
  out.scores = std::move(scores);
  out.feats.source = HierarchicalFeatures<T>::Source::kDiscriminator;
  for (const auto& t : plan_.taps)
    out.feats.push(t.level, outs[static_cast<size_t>(plan_.trunk_block_of_tap(t.level))]);

  if (pass.grad) {
    final_pre_relu_ = final_out;
    pooled_ = std::move(pooled);
    embed_rows_ = std::move(rows);
    has_cache_ = true;
  }
  return out;
}

template <typename T>
Tensor<T> Discriminator<T>::backward(const Tensor<T>& dscores,
                                     const HierarchicalFeatures<T>* d_feats, bool param_grads) {
  if (!has_cache_) throw ShapeError("discriminator: backward without cached forward");
  const int64_t n = pooled_.dim(0), d = pooled_.dim(1);
  if (dscores.numel() != n) throw ShapeError("discriminator backward: dscores size mismatch");

  // score_i = linear(pooled_i) + <embed(c_i), pooled_i>
  Tensor<T> dlin({n, 1});
  Tensor<T> dpooled({n, d});
  Tensor<T> drows({n, d});
  for (int64_t i = 0; i < n; ++i) {
    dlin[i] = dscores[i];
    for (int64_t j = 0; j < d; ++j) {
      dpooled[i * d + j] = dscores[i] * embed_rows_[i * d + j];
      drows[i * d + j] = dscores[i] * pooled_[i * d + j];
    }
  }
  dpooled.add_(head_.backward(dlin, param_grads));
  embed_.backward(drows, param_grads);

  Tensor<T> dh = nn::global_sum_pool_backward(dpooled, final_pre_relu_.dim(2),
                                              final_pre_relu_.dim(3));
  Tensor<T> dfinal = nn::relu_backward(dh, final_pre_relu_);

  std::vector<Tensor<T>> inj(trunk_.num_blocks());
  inj.back() = std::move(dfinal);
  if (d_feats != nullptr) {
    for (size_t i = 0; i < d_feats->levels.size(); ++i) {
      const int level = d_feats->levels[i];
      auto& slot = inj[static_cast<size_t>(plan_.trunk_block_of_tap(level))];
      if (slot.empty())
        slot = d_feats->feats[i];
      else
        slot.add_(d_feats->feats[i]);
    }
  }
  has_cache_ = false;
  final_pre_relu_ = Tensor<T>();
  return trunk_.backward(inj, param_grads);
}

template <typename T>
void Discriminator<T>::visit(const std::string& prefix, const nn::ParamVisitor<T>& fn) {
  trunk_.visit(prefix + "trunk.", fn);
  head_.visit(prefix + "head.linear.", fn);
  embed_.visit(prefix + "head.embed.", fn);
}

// ---- Adaptors ----

template <typename T>
Adaptors<T>::Adaptors(const ArchPlan& plan, AdaptorMode mode, std::vector<int> active_levels)
    : plan_(plan), mode_(mode), active_(std::move(active_levels)) {
  if (active_.empty()) active_ = plan.tap_levels();
  std::sort(active_.begin(), active_.end());
  for (int level : active_)
    if (!plan.has_tap(level))
      throw ConfigError("adaptor level " + std::to_string(level) + " has no tap");
  if (mode_ == AdaptorMode::kLearned) {
    for (int level : active_) {
      const TapSpec& t = plan.tap(level);
      Unit u;
      u.level = level;
      u.deepest = level == 6;
      if (u.deepest) {
        u.conv1 = nn::Conv2d<T>(t.channels, t.channels, 3, false);
        u.conv2 = nn::Conv2d<T>(t.channels, t.channels, 3, false);
      } else {
        u.conv1 = nn::Conv2d<T>(t.channels, t.adapted_channels, 3, false);
        u.conv2 = nn::Conv2d<T>(t.adapted_channels, t.adapted_channels, 3, false);
        u.conv3 = nn::Conv2d<T>(t.adapted_channels, t.adapted_channels, 1, false);
      }
      units_.push_back(std::move(u));
    }
  }
}

template <typename T>
void Adaptors<T>::init(Rng& rng) {
  for (auto& u : units_) {
    u.conv1.init(rng);
    u.conv2.init(rng);
    if (!u.deepest) u.conv3.init(rng);
  }
}

template <typename T>
HierarchicalFeatures<T> Adaptors<T>::adapt(const HierarchicalFeatures<T>& feats,
                                           const nn::Pass& pass) {
  HierarchicalFeatures<T> out;
  out.source = HierarchicalFeatures<T>::Source::kAdaptor;
  for (int level : active_) {
    const TapSpec& t = plan_.tap(level);
    const Tensor<T>& x = feats.at_level(level);
    x.require_shape({x.dim(0), t.channels, t.spatial, t.spatial}, "adapt input");
    if (mode_ == AdaptorMode::kChannelDuplicate) {
      if (level == 6) {
        out.push(level, x);
        continue;
      }
      const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
      Tensor<T> y({n, 2 * c, x.dim(2), x.dim(3)});
      for (int64_t s = 0; s < n; ++s) {
        std::memcpy(y.data() + s * 2 * c * hw, x.data() + s * c * hw,
                    sizeof(T) * static_cast<size_t>(c * hw));
        std::memcpy(y.data() + (s * 2 + 1) * c * hw, x.data() + s * c * hw,
                    sizeof(T) * static_cast<size_t>(c * hw));
      }
      out.push(level, std::move(y));
      continue;
    }
    Unit* u = unit_of(level);
    Tensor<T> h;
    if (u->deepest) {
      h = u->conv2.forward(u->conv1.forward(x, pass), pass);
    } else {
      Tensor<T> r = nn::relu(x);
      h = u->conv3.forward(u->conv2.forward(u->conv1.forward(r, pass), pass), pass);
      if (pass.grad) u->x_pre_relu = x;
    }
    out.push(level, std::move(h));
  }
  return out;
}

template <typename T>
HierarchicalFeatures<T> Adaptors<T>::backward(const HierarchicalFeatures<T>& d_adapted,
                                              bool param_grads) {
  HierarchicalFeatures<T> din;
  din.source = HierarchicalFeatures<T>::Source::kEncoder;
  for (size_t i = 0; i < d_adapted.levels.size(); ++i) {
    const int level = d_adapted.levels[i];
    const Tensor<T>& gy = d_adapted.feats[i];
    if (mode_ == AdaptorMode::kChannelDuplicate) {
      if (level == 6) {
        din.push(level, gy);
        continue;
      }
      const int64_t n = gy.dim(0), c2 = gy.dim(1), hw = gy.dim(2) * gy.dim(3);
      const int64_t c = c2 / 2;
      Tensor<T> gx({n, c, gy.dim(2), gy.dim(3)});
      for (int64_t s = 0; s < n; ++s)
        for (int64_t j = 0; j < c * hw; ++j)
          gx[s * c * hw + j] = gy[s * c2 * hw + j] + gy[s * c2 * hw + c * hw + j];
      din.push(level, std::move(gx));
      continue;
    }
    Unit* u = unit_of(level);
    Tensor<T> g;
    if (u->deepest) {
      g = u->conv1.backward(u->conv2.backward(gy, param_grads), param_grads);
    } else {
      g = u->conv1.backward(
          u->conv2.backward(u->conv3.backward(gy, param_grads), param_grads), param_grads);
      g = nn::relu_backward(g, u->x_pre_relu);
      u->x_pre_relu = Tensor<T>();
    }
    din.push(level, std::move(g));
  }
  return din;
}

template <typename T>
typename Adaptors<T>::Unit* Adaptors<T>::unit_of(int level) {
  for (auto& u : units_)
    if (u.level == level) return &u;
  throw ShapeError("adaptors: no unit for level " + std::to_string(level));
}

template <typename T>
void Adaptors<T>::visit(const std::string& prefix, const nn::ParamVisitor<T>& fn) {
  for (auto& u : units_) {
    const std::string p = prefix + "level" + std::to_string(u.level) + ".";
    u.conv1.visit(p + "conv1.", fn);
    u.conv2.visit(p + "conv2.", fn);
    if (!u.deepest) u.conv3.visit(p + "conv3.", fn);
  }
}

// ---- Generator ----

template <typename T>
Generator<T>::Generator(const ArchPlan& plan)
    : plan_(plan),
      embed_(plan.cfg.num_classes, plan.cfg.embed_dim),
      linear_(plan.z_chunks[0], plan.g_init_ch * plan.g_init_spatial * plan.g_init_spatial, true,
              plan.cfg.spectral_norm),
      final_bn_(plan.gblocks.back().out_ch),
      final_conv_(plan.gblocks.back().out_ch, 3, 3, plan.cfg.spectral_norm) {
  for (const auto& spec : plan.gblocks)
    blocks_.emplace_back(spec.in_ch, spec.out_ch, plan.cond_dim, plan.cfg.spectral_norm);
  if (plan.g_attn_after >= 0)
    attn_ = nn::SelfAttention2d<T>(plan.gblocks[static_cast<size_t>(plan.g_attn_after)].out_ch,
                                   plan.cfg.spectral_norm);
}

template <typename T>
void Generator<T>::init(Rng& rng) {
  embed_.init(rng);
  linear_.init(rng);
  for (auto& b : blocks_) b.init(rng);
  if (plan_.g_attn_after >= 0) attn_.init(rng);
  // final BN gamma/beta default (1, 0); conv orthogonal
  final_conv_.init(rng);
}

namespace {

template <typename T>
Tensor<T> hconcat(const Tensor<T>& a, const Tensor<T>& b) {
  const int64_t n = a.dim(0), da = a.dim(1), db = b.dim(1);
  Tensor<T> out({n, da + db});
  for (int64_t i = 0; i < n; ++i) {
    std::memcpy(out.data() + i * (da + db), a.data() + i * da, sizeof(T) * static_cast<size_t>(da));
    std::memcpy(out.data() + i * (da + db) + da, b.data() + i * db,
                sizeof(T) * static_cast<size_t>(db));
  }
  return out;
}

template <typename T>
Tensor<T> columns(const Tensor<T>& x, int64_t from, int64_t len) {
  const int64_t n = x.dim(0), d = x.dim(1);
  Tensor<T> out({n, len});
  for (int64_t i = 0; i < n; ++i)
    std::memcpy(out.data() + i * len, x.data() + i * d + from, sizeof(T) * static_cast<size_t>(len));
  return out;
}

}  // namespace

template <typename T>
Tensor<T> Generator<T>::generate(const HierarchicalFeatures<T>* adapted, const Tensor<T>& z,
                                 const std::vector<int64_t>& labels, const nn::Pass& pass) {
  Tensor<T> rows = embed_.forward(labels, pass.grad);
  return run(adapted, z, rows, pass, true);
}

template <typename T>
Tensor<T> Generator<T>::generate_from_embeddings(const HierarchicalFeatures<T>* adapted,
                                                 const Tensor<T>& z, const Tensor<T>& embeds,
                                                 const nn::Pass& pass) {
  return run(adapted, z, embeds, pass, false);
}

template <typename T>
Tensor<T> Generator<T>::run(const HierarchicalFeatures<T>* adapted, const Tensor<T>& z,
                            const Tensor<T>& embeds, const nn::Pass& pass, bool labels_used) {
  labels_path_ = labels_used;
  const int64_t n = z.dim(0);
  if (z.rank() != 2 || z.dim(1) != plan_.cfg.z_dim)
    throw ShapeError("generate: z must be N x " + std::to_string(plan_.cfg.z_dim));
  if (embeds.dim(0) != n || embeds.dim(1) != plan_.cfg.embed_dim)
    throw ShapeError("generate: embedding rows must be N x " +
                     std::to_string(plan_.cfg.embed_dim));

  if (pass.grad) {
    fused_levels_.clear();
    fused_weights_.clear();
  }
  auto try_fuse = [&](Tensor<T>& x, int level) {
    if (adapted == nullptr || !adapted->has_level(level)) return;
    const T w = static_cast<T>(plan_.cfg.fusion_weight(level));
    if (w == T(0)) return;  // exact identity, and the adapted grad is exactly zero
    const Tensor<T>& f = adapted->at_level(level);
    if (!x.same_shape(f))
      throw ShapeError("fusion at level " + std::to_string(level) + ": shape mismatch " +
                       shape_str(x.shape()) + " vs " + shape_str(f.shape()));
    x.axpy_(w, f);
    if (pass.grad) {
      fused_levels_.push_back(level);
      fused_weights_.push_back(static_cast<double>(w));
    }
  };

  int64_t off = 0;
  Tensor<T> chunk0 = columns(z, off, plan_.z_chunks[0]);
  off += plan_.z_chunks[0];

  Tensor<T> x = linear_.forward(chunk0, pass);
  x.reshape({n, plan_.g_init_ch, plan_.g_init_spatial, plan_.g_init_spatial});
  try_fuse(x, plan_.g_init_fuse_level);

  for (size_t j = 0; j < blocks_.size(); ++j) {
    Tensor<T> chunk = columns(z, off, plan_.z_chunks[j + 1]);
    off += plan_.z_chunks[j + 1];
    Tensor<T> cond = hconcat(embeds, chunk);
    x = blocks_[j].forward(x, cond, pass);
    if (plan_.gblocks[j].fuse_level) try_fuse(x, plan_.gblocks[j].fuse_level);
    if (static_cast<int>(j) == plan_.g_attn_after) x = attn_.forward(x, pass);
  }

  Tensor<T> bn = final_bn_.forward(x, pass);
  Tensor<T> r = nn::relu(bn);
  Tensor<T> c = final_conv_.forward(r, pass);
  Tensor<T> y = nn::tanh_op(c);

  if (pass.grad) {
    bn_out_ = std::move(bn);
    tanh_out_ = y;
    has_cache_ = true;
  }
  return y;
}

template <typename T>
HierarchicalFeatures<T> Generator<T>::backward(const Tensor<T>& d_images, bool param_grads) {
  if (!has_cache_) throw ShapeError("generator: backward without cached forward");

  HierarchicalFeatures<T> d_adapted;
  d_adapted.source = HierarchicalFeatures<T>::Source::kAdaptor;

  Tensor<T> dc = nn::tanh_backward(d_images, tanh_out_);
  Tensor<T> dr = final_conv_.backward(dc, param_grads);
  Tensor<T> dbn = nn::relu_backward(dr, bn_out_);
  Tensor<T> dx = final_bn_.backward(dbn, param_grads);

  auto pop_fuse = [&](Tensor<T>& g, int level) {
    if (std::find(fused_levels_.begin(), fused_levels_.end(), level) == fused_levels_.end())
      return;
    Tensor<T> df = g;
    df.scale_(static_cast<T>(plan_.cfg.fusion_weight(level)));
    d_adapted.push(level, std::move(df));
  };

  Tensor<T> dembed;
  for (int j = static_cast<int>(blocks_.size()) - 1; j >= 0; --j) {
    if (j == plan_.g_attn_after) dx = attn_.backward(dx, param_grads);
    if (plan_.gblocks[static_cast<size_t>(j)].fuse_level)
      pop_fuse(dx, plan_.gblocks[static_cast<size_t>(j)].fuse_level);
    auto [dxin, dcond] = blocks_[static_cast<size_t>(j)].backward(dx, param_grads);
    dx = std::move(dxin);
    Tensor<T> de = columns(dcond, 0, plan_.cfg.embed_dim);
    if (dembed.empty())
      dembed = std::move(de);
    else
      dembed.add_(de);
  }
  pop_fuse(dx, plan_.g_init_fuse_level);

  dx.reshape({dx.dim(0), plan_.g_init_ch * plan_.g_init_spatial * plan_.g_init_spatial});
  linear_.backward(dx, param_grads);  // z is an input; its gradient is dropped

  if (labels_path_ && !dembed.empty()) embed_.backward(dembed, param_grads);
  labels_path_ = false;

  // order levels ascending for consistency
  std::vector<size_t> order(d_adapted.levels.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return d_adapted.levels[a] < d_adapted.levels[b]; });
  HierarchicalFeatures<T> sorted;
  sorted.source = d_adapted.source;
  for (size_t i : order) sorted.push(d_adapted.levels[i], std::move(d_adapted.feats[i]));

  has_cache_ = false;
  bn_out_ = Tensor<T>();
  tanh_out_ = Tensor<T>();
  return sorted;
}

template <typename T>
void Generator<T>::visit(const std::string& prefix, const nn::ParamVisitor<T>& fn) {
  embed_.visit(prefix + "embed.", fn);
  linear_.visit(prefix + "linear.", fn);
  for (size_t j = 0; j < blocks_.size(); ++j) {
    blocks_[j].visit(prefix + "block" + std::to_string(j) + ".", fn);
    if (static_cast<int>(j) == plan_.g_attn_after) attn_.visit(prefix + "attn.", fn);
  }
  final_bn_.visit(prefix + "final_bn.", fn);
  final_conv_.visit(prefix + "final_conv.", fn);
}

// ---- Networks ----

template <typename T>
void Networks<T>::visit(const std::string& role, const nn::ParamVisitor<T>& fn) {
  if (role == "encoder" && encoder) {
    encoder->visit("", fn);
  } else if (role == "adaptors" && adaptors) {
    adaptors->visit("", fn);
  } else if (role == "generator" && generator) {
    generator->visit("", fn);
  } else if (role == "discriminator" && discriminator) {
    discriminator->visit("", fn);
  } else {
    throw ConfigError("networks: no such role '" + role + "'");
  }
}

template <typename T>
std::vector<std::string> Networks<T>::roles() const {
  std::vector<std::string> r;
  if (encoder) r.push_back("encoder");
  if (adaptors) r.push_back("adaptors");
  if (generator) r.push_back("generator");
  if (discriminator) r.push_back("discriminator");
  return r;
}

template <typename T>
Networks<T> build_networks(const ArchConfig& cfg, uint64_t seed, const BuildOptions& opts) {
  ArchPlan plan = make_plan(cfg);
  Networks<T> nets;
  nets.plan = plan;
  nets.generator = std::make_unique<Generator<T>>(plan);
  nets.discriminator = std::make_unique<Discriminator<T>>(plan);
  if (opts.with_encoder) {
    nets.encoder = std::make_unique<Encoder<T>>(plan);
    nets.adaptors =
        std::make_unique<Adaptors<T>>(plan, opts.adaptor_mode, opts.active_adaptor_levels);
  }
  // fixed per-role streams so construction order can never shift values
  if (nets.encoder) {
    Rng r(derive_seed(seed, {1}));
    nets.encoder->init(r);
  }
  if (nets.adaptors) {
    Rng r(derive_seed(seed, {2}));
    nets.adaptors->init(r);
  }
  {
    Rng r(derive_seed(seed, {3}));
    nets.generator->init(r);
  }
  {
    Rng r(derive_seed(seed, {4}));
    nets.discriminator->init(r);
  }
  return nets;
}

template <typename T>
std::vector<nn::ParamRef<T>> collect_params(Networks<T>& nets, const std::string& role) {
  std::vector<nn::ParamRef<T>> out;
  nets.visit(role, [&](const nn::ParamRef<T>& p) { out.push_back(p); });
  return out;
}

// ---- explicit instantiations ----

#define DEEPI2I_INSTANTIATE(T)                                                       \
  template struct HierarchicalFeatures<T>;                                           \
  template struct LabeledBatch<T>;                                                   \
  template Tensor<T> fuse<T>(const Tensor<T>&, const Tensor<T>&, T);                 \
  template class Trunk<T>;                                                           \
  template class Encoder<T>;                                                         \
  template class Discriminator<T>;                                                   \
  template class Adaptors<T>;                                                        \
  template class Generator<T>;                                                       \
  template struct Networks<T>;                                                       \
  template Networks<T> build_networks<T>(const ArchConfig&, uint64_t,                \
                                         const BuildOptions&);                       \
  template std::vector<nn::ParamRef<T>> collect_params<T>(Networks<T>&, const std::string&);

DEEPI2I_INSTANTIATE(float)
DEEPI2I_INSTANTIATE(double)

#undef DEEPI2I_INSTANTIATE

}  // namespace deepi2i
