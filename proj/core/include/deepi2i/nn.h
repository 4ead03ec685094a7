#pragma once

#include <functional>
#include <string>
#include <vector>

#include "deepi2i/rng.h"
#include "deepi2i/tensor.h"

namespace deepi2i::nn {

/// Forward-pass mode flags.
///  - train:  use batch statistics (training behaviour of normalization).
///  - grad:   retain caches so backward() can run afterwards.
///  - update: advance buffers (running stats, power-iteration vectors);
///            only honoured when train is set. The train engine clears it
///            for networks outside the current freeze policy, keeping
///            frozen networks bit-identical, buffers included.
/// A forward with grad=false and update=false touches no shared state, so
/// concurrent no-grad evaluation of a shared network is safe.
struct Pass {
  bool train = false;
  bool grad = false;
  bool update = false;
};

inline constexpr Pass kEval{false, false, false};
inline constexpr Pass kGradCheck{true, true, false};
inline constexpr Pass kTrain{true, true, true};

template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* value = nullptr;
  Tensor<T>* grad = nullptr;  // null for buffers
  bool is_buffer = false;
};

template <typename T>
using ParamVisitor = std::function<void(const ParamRef<T>&)>;

/// Orthogonal init of a (rows x cols) matrix, deterministic given rng.
template <typename T>
void orthogonal_init(Tensor<T>& w, int64_t rows, int64_t cols, Rng& rng);

// ---- stateless ops (shape-checked, used inside blocks and tests) ----

template <typename T>
Tensor<T> relu(const Tensor<T>& x);
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& gy, const Tensor<T>& x_pre);

template <typename T>
Tensor<T> avg_pool2(const Tensor<T>& x);  // 2x2 mean, stride 2
template <typename T>
Tensor<T> avg_pool2_backward(const Tensor<T>& gy, int64_t in_h, int64_t in_w);

template <typename T>
Tensor<T> upsample2(const Tensor<T>& x);  // nearest neighbour x2
template <typename T>
Tensor<T> upsample2_backward(const Tensor<T>& gy);

template <typename T>
Tensor<T> global_sum_pool(const Tensor<T>& x);  // NCHW -> N x C
template <typename T>
Tensor<T> global_sum_pool_backward(const Tensor<T>& gy, int64_t h, int64_t w);

template <typename T>
Tensor<T> tanh_op(const Tensor<T>& x);
template <typename T>
Tensor<T> tanh_backward(const Tensor<T>& gy, const Tensor<T>& y);

// ---- layers ----

/// 3x3 or 1x1 convolution, stride 1, same padding, via im2col + GEMM.
/// Optional spectral normalization (one power iteration per training step,
/// u/v treated as constants in the backward pass).
template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int64_t in_ch, int64_t out_ch, int64_t ksize, bool spectral_norm);

  void init(Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, const Pass& pass);
  Tensor<T> backward(const Tensor<T>& gy, bool param_grads);
  void visit(const std::string& prefix, const ParamVisitor<T>& fn);

  int64_t in_channels() const { return in_ch_; }
  int64_t out_channels() const { return out_ch_; }
  Tensor<T>& weight() { return w_; }

 private:
  Tensor<T> effective_weight(const Pass& pass);

  int64_t in_ch_ = 0, out_ch_ = 0, ksize_ = 1, pad_ = 0;
  bool sn_ = false;
  Tensor<T> w_;  // (out, in*k*k)
  Tensor<T> b_;  // (out)
  Tensor<T> gw_, gb_;
  Tensor<T> sn_u_;  // (out)

  // backward cache
  Tensor<T> col_;  // (in*k*k, N*H*W)
  T sigma_ = T(1);
  Tensor<T> sn_v_;
  Shape x_shape_;
  bool has_cache_ = false;
};

template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(int64_t in_dim, int64_t out_dim, bool bias, bool spectral_norm);

  void init(Rng& rng);
  /// Zero-filled weights; used for conditional-norm projections when a
  /// zero-centred start is wanted.
  void init_zero();
  Tensor<T> forward(const Tensor<T>& x, const Pass& pass);  // (N,in) -> (N,out)
  Tensor<T> backward(const Tensor<T>& gy, bool param_grads);
  void visit(const std::string& prefix, const ParamVisitor<T>& fn);

  int64_t in_dim() const { return in_dim_; }
  int64_t out_dim() const { return out_dim_; }

 private:
  Tensor<T> effective_weight(const Pass& pass);

  int64_t in_dim_ = 0, out_dim_ = 0;
  bool bias_ = true, sn_ = false;
  Tensor<T> w_;  // (out, in)
  Tensor<T> b_;
  Tensor<T> gw_, gb_;
  Tensor<T> sn_u_;

  Tensor<T> x_;
  T sigma_ = T(1);
  Tensor<T> sn_v_;
  bool has_cache_ = false;
};

template <typename T>
class Embedding {
 public:
  Embedding() = default;
  Embedding(int64_t num_classes, int64_t dim);

  void init(Rng& rng);
  Tensor<T> forward(const std::vector<int64_t>& labels, bool grad);  // (N, dim)
  void backward(const Tensor<T>& gy, bool param_grads);
  void visit(const std::string& prefix, const ParamVisitor<T>& fn);

  int64_t num_classes() const { return num_classes_; }
  int64_t dim() const { return dim_; }
  Tensor<T>& table() { return w_; }
  /// Row c as a (1, dim) tensor.
  Tensor<T> row(int64_t c) const;

 private:
  int64_t num_classes_ = 0, dim_ = 0;
  Tensor<T> w_;  // (C, dim)
  Tensor<T> gw_;
  std::vector<int64_t> labels_;
  bool has_cache_ = false;
};

/// Plain batch normalization with learned per-channel gain/bias.
template <typename T>
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  explicit BatchNorm2d(int64_t ch);

  Tensor<T> forward(const Tensor<T>& x, const Pass& pass);
  Tensor<T> backward(const Tensor<T>& gy, bool param_grads);
  void visit(const std::string& prefix, const ParamVisitor<T>& fn);

 private:
  int64_t ch_ = 0;
  T eps_ = T(1e-5), momentum_ = T(0.1);
  Tensor<T> gamma_, beta_, ggamma_, gbeta_;
  Tensor<T> run_mean_, run_var_;

  Tensor<T> xhat_, inv_std_;
  bool has_cache_ = false;
};

/// Conditional batch normalization: per-sample gain/bias are affine
/// projections of a conditioning vector (class embedding + noise chunk).
template <typename T>
class ConditionalBatchNorm2d {
 public:
  ConditionalBatchNorm2d() = default;
  ConditionalBatchNorm2d(int64_t ch, int64_t cond_dim, bool spectral_norm);

  void init(Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& cond, const Pass& pass);
  /// Returns (dx, dcond).
  std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& gy, bool param_grads);
  void visit(const std::string& prefix, const ParamVisitor<T>& fn);

 private:
  int64_t ch_ = 0, cond_dim_ = 0;
  T eps_ = T(1e-5), momentum_ = T(0.1);
  Linear<T> gain_, bias_;
  Tensor<T> run_mean_, run_var_;

  Tensor<T> xhat_, inv_std_, gamma_rows_;
  bool has_cache_ = false;
};

/// Non-local self-attention over spatial positions with a learned residual
/// gate (gamma, zero-initialized).
template <typename T>
class SelfAttention2d {
 public:
  SelfAttention2d() = default;
  explicit SelfAttention2d(int64_t ch, bool spectral_norm);

  void init(Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, const Pass& pass);
  Tensor<T> backward(const Tensor<T>& gy, bool param_grads);
  void visit(const std::string& prefix, const ParamVisitor<T>& fn);

 private:
  int64_t ch_ = 0, qk_ch_ = 0, v_ch_ = 0;
  Conv2d<T> theta_, phi_, g_, out_;
  Tensor<T> gamma_;  // scalar
  Tensor<T> ggamma_;

  Tensor<T> x_, q_, k_, v_, attn_, av_, proj_;
  bool has_cache_ = false;
};

/// Residual downsampling block (discriminator/encoder style):
///   main: [ReLU] -> conv3x3 -> ReLU -> conv3x3 -> [avgpool]
///   shortcut: 1x1 conv when channels change, pooled when downsampling.
/// The input block (from RGB) skips the leading ReLU and pools before the
/// shortcut conv.
template <typename T>
class DBlock {
 public:
  DBlock() = default;
  DBlock(int64_t in_ch, int64_t out_ch, bool down, bool pre_act, bool spectral_norm);

  void init(Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, const Pass& pass);
  Tensor<T> backward(const Tensor<T>& gy, bool param_grads);
  void visit(const std::string& prefix, const ParamVisitor<T>& fn);

  int64_t out_channels() const { return out_ch_; }

 private:
  int64_t in_ch_ = 0, out_ch_ = 0;
  bool down_ = false, pre_act_ = true, learnable_sc_ = false;
  Conv2d<T> conv1_, conv2_, conv_sc_;

  Tensor<T> x_, h1_;  // pre-ReLU caches
  int64_t in_h_ = 0, in_w_ = 0;
  bool has_cache_ = false;
};

/// Residual upsampling block (generator style) with conditional
/// normalization:
///   main: cbn -> ReLU -> up x2 -> conv3x3 -> cbn -> ReLU -> conv3x3
///   shortcut: up x2 -> conv1x1
template <typename T>
class GBlock {
 public:
  GBlock() = default;
  GBlock(int64_t in_ch, int64_t out_ch, int64_t cond_dim, bool spectral_norm);

  void init(Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& cond, const Pass& pass);
  /// Returns (dx, dcond).
  std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& gy, bool param_grads);
  void visit(const std::string& prefix, const ParamVisitor<T>& fn);

  int64_t out_channels() const { return out_ch_; }

 private:
  int64_t in_ch_ = 0, out_ch_ = 0;
  ConditionalBatchNorm2d<T> cbn1_, cbn2_;
  Conv2d<T> conv1_, conv2_, conv_sc_;

  Tensor<T> n1_, n2_;  // pre-ReLU caches
  Shape x_shape_;
  bool has_cache_ = false;
};

}  // namespace deepi2i::nn
