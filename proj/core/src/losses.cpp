#include "deepi2i/losses.h"

#include <cmath>

namespace deepi2i {

double LossConfig::alpha(int level) const {
  auto it = alpha_override.find(level);
  if (it != alpha_override.end()) return it->second;
  return level == 3 ? 0.01 : 0.1;
}

void LossConfig::validate() const {
  if (lambda_adv < 0 || lambda_rec < 0) throw ConfigError("loss weights must be >= 0");
  for (const auto& [level, a] : alpha_override)
    if (a < 0) throw ConfigError("alpha for level " + std::to_string(level) + " must be >= 0");
  if (orthogonal_reg_strength < 0) throw ConfigError("orthogonal_reg_strength must be >= 0");
}

namespace {

template <typename T>
double softplus(T x) {
  // log(1 + e^x), stable
  return x > 0 ? static_cast<double>(x) + std::log1p(std::exp(-static_cast<double>(x)))
               : std::log1p(std::exp(static_cast<double>(x)));
}

template <typename T>
double sigmoid(T x) {
  return 1.0 / (1.0 + std::exp(-static_cast<double>(x)));
}

}  // namespace

template <typename T>
double adv_loss_d(AdvLossKind kind, const Tensor<T>& score_real, const Tensor<T>& score_fake,
                  Tensor<T>* d_real, Tensor<T>* d_fake) {
  const int64_t nr = score_real.numel(), nf = score_fake.numel();
  if (nr == 0 || nf == 0) throw ConfigError("adv_loss_d: empty batch");
  if (d_real) *d_real = Tensor<T>(score_real.shape());
  if (d_fake) *d_fake = Tensor<T>(score_fake.shape());
  double loss = 0;
  if (kind == AdvLossKind::kHinge) {
    for (int64_t i = 0; i < nr; ++i) {
      const double m = 1.0 - static_cast<double>(score_real[i]);
      if (m > 0) {
        loss += m / nr;
        if (d_real) (*d_real)[i] = static_cast<T>(-1.0 / nr);
      }
    }
    for (int64_t i = 0; i < nf; ++i) {
      const double m = 1.0 + static_cast<double>(score_fake[i]);
      if (m > 0) {
        loss += m / nf;
        if (d_fake) (*d_fake)[i] = static_cast<T>(1.0 / nf);
      }
    }
  } else {
    for (int64_t i = 0; i < nr; ++i) {
      loss += softplus(-score_real[i]) / nr;  // -log sigmoid(s)
      if (d_real) (*d_real)[i] = static_cast<T>((sigmoid(score_real[i]) - 1.0) / nr);
    }
    for (int64_t i = 0; i < nf; ++i) {
      loss += softplus(score_fake[i]) / nf;  // -log(1 - sigmoid(s))
      if (d_fake) (*d_fake)[i] = static_cast<T>(sigmoid(score_fake[i]) / nf);
    }
  }
  return loss;
}

template <typename T>
double adv_loss_g(AdvLossKind kind, const Tensor<T>& score_fake, Tensor<T>* d_fake) {
  const int64_t n = score_fake.numel();
  if (n == 0) throw ConfigError("adv_loss_g: empty batch");
  if (d_fake) *d_fake = Tensor<T>(score_fake.shape());
  double loss = 0;
  if (kind == AdvLossKind::kHinge) {
    for (int64_t i = 0; i < n; ++i) {
      loss -= static_cast<double>(score_fake[i]) / n;
      if (d_fake) (*d_fake)[i] = static_cast<T>(-1.0 / n);
    }
  } else {
    for (int64_t i = 0; i < n; ++i) {
      loss += softplus(-score_fake[i]) / n;  // non-saturating
      if (d_fake) (*d_fake)[i] = static_cast<T>((sigmoid(score_fake[i]) - 1.0) / n);
    }
  }
  return loss;
}

template <typename T>
double rec_loss(const HierarchicalFeatures<T>& feats_x, const HierarchicalFeatures<T>& feats_gen,
                const LossConfig& cfg, HierarchicalFeatures<T>* d_gen,
                std::map<int, double>* per_level) {
  using Source = typename HierarchicalFeatures<T>::Source;
  if (feats_x.source != Source::kDiscriminator || feats_gen.source != Source::kDiscriminator)
    throw ShapeError("rec_loss: both pyramids must come from the discriminator");
  if (feats_x.levels != feats_gen.levels)
    throw ShapeError("rec_loss: pyramids carry different levels");
  if (d_gen) {
    *d_gen = HierarchicalFeatures<T>();
    d_gen->source = Source::kDiscriminator;
  }
  double total = 0;
  for (size_t i = 0; i < feats_x.levels.size(); ++i) {
    const int level = feats_x.levels[i];
    const Tensor<T>& a = feats_x.feats[i];
    const Tensor<T>& b = feats_gen.feats[i];
    if (!a.same_shape(b))
      throw ShapeError("rec_loss: level " + std::to_string(level) + " shape mismatch");
    const double alpha = cfg.alpha(level);
    const double scale = cfg.rec_sum_mode ? 1.0 : 1.0 / static_cast<double>(a.numel());
    double l1 = 0;
    for (int64_t j = 0; j < a.numel(); ++j) l1 += std::abs(static_cast<double>(b[j] - a[j]));
    const double contrib = alpha * l1 * scale;
    total += contrib;
    if (per_level) (*per_level)[level] = contrib;
    if (d_gen) {
      Tensor<T> g(b.shape());
      const T gval = static_cast<T>(alpha * scale);
      for (int64_t j = 0; j < a.numel(); ++j) {
        const T diff = b[j] - a[j];
        g[j] = diff > T(0) ? gval : (diff < T(0) ? -gval : T(0));
      }
      d_gen->push(level, std::move(g));
    }
  }
  return total;
}

LossReport total_losses(double adv_g, double adv_d, double rec, const LossConfig& cfg) {
  LossReport r;
  r.adv_g = adv_g;
  r.adv_d = adv_d;
  r.rec = rec;
  r.total_g = cfg.lambda_adv * adv_g + cfg.lambda_rec * rec;
  r.total_d = cfg.lambda_adv * adv_d;
  const bool finite = std::isfinite(r.adv_g) && std::isfinite(r.adv_d) && std::isfinite(r.rec) &&
                      std::isfinite(r.total_g) && std::isfinite(r.total_d);
  if (!finite)
    throw DivergenceError("non-finite loss (adv_g=" + std::to_string(adv_g) +
                              ", adv_d=" + std::to_string(adv_d) + ", rec=" + std::to_string(rec) +
                              ")",
                          r);
  return r;
}

#define DEEPI2I_INSTANTIATE(T)                                                                \
  template double adv_loss_d<T>(AdvLossKind, const Tensor<T>&, const Tensor<T>&, Tensor<T>*,  \
                                Tensor<T>*);                                                  \
  template double adv_loss_g<T>(AdvLossKind, const Tensor<T>&, Tensor<T>*);                   \
  template double rec_loss<T>(const HierarchicalFeatures<T>&, const HierarchicalFeatures<T>&, \
                              const LossConfig&, HierarchicalFeatures<T>*,                    \
                              std::map<int, double>*);

DEEPI2I_INSTANTIATE(float)
DEEPI2I_INSTANTIATE(double)

#undef DEEPI2I_INSTANTIATE

}  // namespace deepi2i
