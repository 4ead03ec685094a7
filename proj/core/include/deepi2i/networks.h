#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "deepi2i/arch.h"
#include "deepi2i/nn.h"
#include "deepi2i/rng.h"
#include "deepi2i/tensor.h"

namespace deepi2i {

/// Ordered pyramid of per-level activations, shallow (low level index,
/// high resolution) to deep.
template <typename T>
struct HierarchicalFeatures {
  enum class Source { kEncoder, kDiscriminator, kAdaptor };
  Source source = Source::kEncoder;
  std::vector<int> levels;
  std::vector<Tensor<T>> feats;

  bool has_level(int level) const;
  const Tensor<T>& at_level(int level) const;
  Tensor<T>& at_level(int level);
  int64_t batch() const;
  void push(int level, Tensor<T> f);
};

template <typename T>
struct LabeledBatch {
  Tensor<T> images;  // N x 3 x H x W, values in [-1, 1]
  std::vector<int64_t> labels;

  int64_t size() const { return images.empty() ? 0 : images.dim(0); }
  void validate(const ArchConfig& cfg) const;
};

/// Elementwise hierarchical fusion: phi + w * lambda.
template <typename T>
Tensor<T> fuse(const Tensor<T>& gen_activation, const Tensor<T>& adapted, T weight);

/// Residual-block stack shared by the encoder and the discriminator.
template <typename T>
class Trunk {
 public:
  Trunk() = default;
  explicit Trunk(const ArchPlan& plan);

  void init(Rng& rng);
  /// Per-block outputs (post-attention where the insert applies).
  std::vector<Tensor<T>> forward(const Tensor<T>& x, const nn::Pass& pass);
  /// d_block_out[j] is an optional gradient injected at block j's output.
  Tensor<T> backward(std::vector<Tensor<T>>& d_block_out, bool param_grads);
  void visit(const std::string& prefix, const nn::ParamVisitor<T>& fn);
  size_t num_blocks() const { return blocks_.size(); }

 private:
  std::vector<nn::DBlock<T>> blocks_;
  int attn_after_ = -1;
  nn::SelfAttention2d<T> attn_;
  std::vector<Shape> out_shapes_;
};

template <typename T>
class Encoder {
 public:
  Encoder() = default;
  explicit Encoder(const ArchPlan& plan);

  void init(Rng& rng);
  HierarchicalFeatures<T> encode(const Tensor<T>& images, const nn::Pass& pass);
  /// Gradients injected at tap outputs; returns grad w.r.t. the input images.
  Tensor<T> backward(const HierarchicalFeatures<T>& d_feats, bool param_grads);
  void visit(const std::string& prefix, const nn::ParamVisitor<T>& fn);
  const ArchPlan& plan() const { return plan_; }

 private:
  ArchPlan plan_;
  Trunk<T> trunk_;
};

template <typename T>
struct DiscriminatorOutput {
  Tensor<T> scores;  // (N)
  HierarchicalFeatures<T> feats;
};

template <typename T>
class Discriminator {
 public:
  Discriminator() = default;
  explicit Discriminator(const ArchPlan& plan);

  void init(Rng& rng);
  DiscriminatorOutput<T> discriminate(const Tensor<T>& images,
                                      const std::vector<int64_t>& labels, const nn::Pass& pass);
  /// dscores + optional per-level gradients on the returned features;
  /// returns grad w.r.t. the input images.
  Tensor<T> backward(const Tensor<T>& dscores, const HierarchicalFeatures<T>* d_feats,
                     bool param_grads);
  void visit(const std::string& prefix, const nn::ParamVisitor<T>& fn);
  const ArchPlan& plan() const { return plan_; }

 private:
  ArchPlan plan_;
  Trunk<T> trunk_;
  nn::Linear<T> head_;
  nn::Embedding<T> embed_;

  Tensor<T> final_pre_relu_, pooled_, embed_rows_;
  bool has_cache_ = false;
};

enum class AdaptorMode {
  kLearned,           // ReLU + two 3x3 convs + 1x1 conv (deepest: two 3x3 convs)
  kChannelDuplicate,  // parameter-free channel duplication (direct-sum baseline)
};

template <typename T>
class Adaptors {
 public:
  Adaptors() = default;
  /// active_levels empty = all tap levels active.
  Adaptors(const ArchPlan& plan, AdaptorMode mode, std::vector<int> active_levels);

  void init(Rng& rng);
  HierarchicalFeatures<T> adapt(const HierarchicalFeatures<T>& feats, const nn::Pass& pass);
  /// Gradients w.r.t. the adapted outputs -> gradients w.r.t. encoder features.
  HierarchicalFeatures<T> backward(const HierarchicalFeatures<T>& d_adapted, bool param_grads);
  void visit(const std::string& prefix, const nn::ParamVisitor<T>& fn);
  const std::vector<int>& active_levels() const { return active_; }
  AdaptorMode mode() const { return mode_; }

 private:
  struct Unit {
    int level = 0;
    bool deepest = false;
    nn::Conv2d<T> conv1, conv2, conv3;
    Tensor<T> x_pre_relu;
  };
  Unit* unit_of(int level);
  ArchPlan plan_;
  AdaptorMode mode_ = AdaptorMode::kLearned;
  std::vector<int> active_;
  std::vector<Unit> units_;
};

template <typename T>
class Generator {
 public:
  Generator() = default;
  explicit Generator(const ArchPlan& plan);

  void init(Rng& rng);
  /// adapted may be null: plain class-conditional generation from (z, c).
  Tensor<T> generate(const HierarchicalFeatures<T>* adapted, const Tensor<T>& z,
                     const std::vector<int64_t>& labels, const nn::Pass& pass);
  /// Same pipeline with caller-provided embedding rows (N x embed_dim);
  /// label lookup and this path produce bit-identical images for equal rows.
  Tensor<T> generate_from_embeddings(const HierarchicalFeatures<T>* adapted, const Tensor<T>& z,
                                     const Tensor<T>& embeds, const nn::Pass& pass);
  /// Returns gradients w.r.t. the adapted features fused in the last forward.
  HierarchicalFeatures<T> backward(const Tensor<T>& d_images, bool param_grads);
  void visit(const std::string& prefix, const nn::ParamVisitor<T>& fn);
  const ArchPlan& plan() const { return plan_; }
  nn::Embedding<T>& embedding() { return embed_; }

 private:
  Tensor<T> run(const HierarchicalFeatures<T>* adapted, const Tensor<T>& z,
                const Tensor<T>& embeds, const nn::Pass& pass, bool labels_used);

  ArchPlan plan_;
  nn::Embedding<T> embed_;
  nn::Linear<T> linear_;
  std::vector<nn::GBlock<T>> blocks_;
  nn::SelfAttention2d<T> attn_;
  nn::BatchNorm2d<T> final_bn_;
  nn::Conv2d<T> final_conv_;

  // backward caches
  std::vector<int> fused_levels_;
  std::vector<double> fused_weights_;
  Tensor<T> bn_out_, tanh_out_;
  bool labels_path_ = false;
  bool has_cache_ = false;
};

/// The four networks plus the derived plan. Encoder/adaptors are absent in
/// plain conditional-GAN mode (pretraining).
template <typename T>
struct Networks {
  ArchPlan plan;
  std::unique_ptr<Encoder<T>> encoder;
  std::unique_ptr<Adaptors<T>> adaptors;
  std::unique_ptr<Generator<T>> generator;
  std::unique_ptr<Discriminator<T>> discriminator;

  bool is_i2i() const { return encoder != nullptr; }
  /// Visits one network's parameters; role in {encoder, adaptors, generator,
  /// discriminator}.
  void visit(const std::string& role, const nn::ParamVisitor<T>& fn);
  std::vector<std::string> roles() const;
};

struct BuildOptions {
  bool with_encoder = true;
  AdaptorMode adaptor_mode = AdaptorMode::kLearned;
  std::vector<int> active_adaptor_levels;  // empty = all
};

/// Deterministic construction: same (cfg, seed) twice gives identical values.
template <typename T>
Networks<T> build_networks(const ArchConfig& cfg, uint64_t seed, const BuildOptions& opts = {});

/// Collect (name -> ParamRef) pairs for one network.
template <typename T>
std::vector<nn::ParamRef<T>> collect_params(Networks<T>& nets, const std::string& role);

extern template struct Networks<float>;
extern template struct Networks<double>;

}  // namespace deepi2i
