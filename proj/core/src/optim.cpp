#include "deepi2i/optim.h"

#include <cmath>

#include "deepi2i/blas.h"

namespace deepi2i {

template <typename T>
void Adam<T>::step(const std::vector<nn::ParamRef<T>>& params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (const auto& p : params) {
    if (p.is_buffer || p.grad == nullptr) continue;
    auto [it, inserted] = state_.try_emplace(p.name);
    if (inserted) {
      it->second.first = Tensor<T>(p.value->shape());
      it->second.second = Tensor<T>(p.value->shape());
    }
    Tensor<T>& m = it->second.first;
    Tensor<T>& v = it->second.second;
    Tensor<T>& val = *p.value;
    const Tensor<T>& g = *p.grad;
    for (int64_t i = 0; i < val.numel(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = b1_ * static_cast<double>(m[i]) + (1.0 - b1_) * gi;
      const double vi = b2_ * static_cast<double>(v[i]) + (1.0 - b2_) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      val[i] = static_cast<T>(static_cast<double>(val[i]) - lr_ * mhat / (std::sqrt(vhat) + eps_));
    }
  }
}

template <typename T>
void Adam<T>::reset() {
  t_ = 0;
  state_.clear();
}

template <typename T>
void ema_update(Tensor<T>& averaged, const Tensor<T>& current, T decay) {
  if (!averaged.same_shape(current)) throw ShapeError("ema_update: shape mismatch");
  if (decay < T(0) || decay >= T(1)) throw ConfigError("ema decay must be in [0, 1)");
  for (int64_t i = 0; i < averaged.numel(); ++i)
    averaged[i] = decay * averaged[i] + (T(1) - decay) * current[i];
}

template <typename T>
void add_orthogonal_reg_grad(const std::vector<nn::ParamRef<T>>& params, double strength) {
  if (strength <= 0) return;
  for (const auto& p : params) {
    if (p.is_buffer || p.grad == nullptr) continue;
    if (p.value->rank() != 2) continue;
    if (p.name.size() < 6 || p.name.substr(p.name.size() - 6) != "weight") continue;
    if (p.name.find("embed") != std::string::npos) continue;
    const Tensor<T>& w = *p.value;
    const int64_t r = w.dim(0), c = w.dim(1);
    Tensor<T> gram({r, r});
    gemm(false, true, r, r, c, T(1), w.data(), c, w.data(), c, T(0), gram.data(), r);
    for (int64_t i = 0; i < r; ++i) gram[i * r + i] = T(0);
    // d/dW ||offdiag(W W^T)||_F^2 = 4 * offdiag(W W^T) * W
    gemm(false, false, r, c, r, static_cast<T>(4.0 * strength), gram.data(), r, w.data(), c, T(1),
         p.grad->data(), c);
  }
}

template <typename T>
double clip_grad_norm(const std::vector<nn::ParamRef<T>>& params, double max_norm) {
  double sq = 0;
  for (const auto& p : params) {
    if (p.is_buffer || p.grad == nullptr) continue;
    for (int64_t i = 0; i < p.grad->numel(); ++i)
      sq += static_cast<double>((*p.grad)[i]) * static_cast<double>((*p.grad)[i]);
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const T scale = static_cast<T>(max_norm / (norm + 1e-12));
    for (const auto& p : params) {
      if (p.is_buffer || p.grad == nullptr) continue;
      p.grad->scale_(scale);
    }
  }
  return norm;
}

template <typename T>
void zero_grads(const std::vector<nn::ParamRef<T>>& params) {
  for (const auto& p : params)
    if (p.grad != nullptr) p.grad->zero();
}

#define DEEPI2I_INSTANTIATE(T)                                                          \
  template class Adam<T>;                                                               \
  template void ema_update<T>(Tensor<T>&, const Tensor<T>&, T);                         \
  template void add_orthogonal_reg_grad<T>(const std::vector<nn::ParamRef<T>>&, double); \
  template double clip_grad_norm<T>(const std::vector<nn::ParamRef<T>>&, double);       \
  template void zero_grads<T>(const std::vector<nn::ParamRef<T>>&);

DEEPI2I_INSTANTIATE(float)
DEEPI2I_INSTANTIATE(double)

#undef DEEPI2I_INSTANTIATE

}  // namespace deepi2i
