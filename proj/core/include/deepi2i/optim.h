#pragma once

#include <map>
#include <string>
#include <vector>

#include "deepi2i/nn.h"
#include "deepi2i/tensor.h"

namespace deepi2i {

/// Adam with bias correction. One instance per network; state is keyed by
/// parameter name and created lazily.
template <typename T>
class Adam {
 public:
  Adam() = default;
  Adam(double lr, double beta1, double beta2, double eps = 1e-8)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

  /// Applies one update to every non-buffer parameter and advances t.
  void step(const std::vector<nn::ParamRef<T>>& params);
  void reset();
  double lr() const { return lr_; }
  int64_t t() const { return t_; }

 private:
  double lr_ = 1e-4, b1_ = 0.0, b2_ = 0.999, eps_ = 1e-8;
  int64_t t_ = 0;
  std::map<std::string, std::pair<Tensor<T>, Tensor<T>>> state_;  // m, v
};

/// p_avg <- decay * p_avg + (1 - decay) * p, elementwise.
template <typename T>
void ema_update(Tensor<T>& averaged, const Tensor<T>& current, T decay);

/// Gradient of sum over weight matrices W of ||offdiag(W W^T)||_F^2, added
/// in place. Applies to rank-2 "weight" parameters, skipping embeddings.
template <typename T>
void add_orthogonal_reg_grad(const std::vector<nn::ParamRef<T>>& params, double strength);

/// Global-norm gradient clip; returns the pre-clip norm.
template <typename T>
double clip_grad_norm(const std::vector<nn::ParamRef<T>>& params, double max_norm);

template <typename T>
void zero_grads(const std::vector<nn::ParamRef<T>>& params);

}  // namespace deepi2i
