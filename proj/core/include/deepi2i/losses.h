#pragma once

#include <map>
#include <string>

#include "deepi2i/arch.h"
#include "deepi2i/networks.h"
#include "deepi2i/tensor.h"

namespace deepi2i {

struct LossConfig {
  double lambda_adv = 1.0;
  double lambda_rec = 1.0;
  AdvLossKind adv_kind = AdvLossKind::kHinge;
  // per-level reconstruction weights; unlisted levels use 0.1, level 3 uses
  // 0.01 (the highest-resolution tap of a four-level pyramid)
  std::map<int, double> alpha_override;
  bool rec_sum_mode = false;  // plain L1 sum instead of per-element mean
  double orthogonal_reg_strength = 0.0;

  double alpha(int level) const;
  void validate() const;
};

struct LossReport {
  double adv_g = 0, adv_d = 0, rec = 0, total_g = 0, total_d = 0;
  std::map<int, double> rec_per_level;
  int64_t iteration = -1;
  int phase = 0;
};

/// Training step produced a non-finite loss; carries the last report.
struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& msg, LossReport report)
      : std::runtime_error(msg), last_report(std::move(report)) {}
  LossReport last_report;
};

/// Discriminator-side adversarial loss.
///   hinge:    mean relu(1 - s_real) + mean relu(1 + s_fake)
///   logistic: -mean log sigmoid(s_real) - mean log(1 - sigmoid(s_fake))
/// Optional output gradients are w.r.t. the raw scores.
template <typename T>
double adv_loss_d(AdvLossKind kind, const Tensor<T>& score_real, const Tensor<T>& score_fake,
                  Tensor<T>* d_real = nullptr, Tensor<T>* d_fake = nullptr);

/// Generator-side adversarial loss (non-saturating for the logistic kind).
template <typename T>
double adv_loss_g(AdvLossKind kind, const Tensor<T>& score_fake, Tensor<T>* d_fake = nullptr);

/// Multi-level L1 feature reconstruction between discriminator pyramids of
/// the source image and of the translation. Gradient flows only into the
/// generated side (d_gen); the discriminator parameters never receive it.
template <typename T>
double rec_loss(const HierarchicalFeatures<T>& feats_x, const HierarchicalFeatures<T>& feats_gen,
                const LossConfig& cfg, HierarchicalFeatures<T>* d_gen = nullptr,
                std::map<int, double>* per_level = nullptr);

/// Weighted totals; throws DivergenceError on non-finite inputs.
LossReport total_losses(double adv_g, double adv_d, double rec, const LossConfig& cfg);

}  // namespace deepi2i
