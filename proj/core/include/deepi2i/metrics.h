#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "deepi2i/data.h"
#include "deepi2i/nn.h"
#include "deepi2i/tensor.h"

namespace deepi2i {

struct FeatureSet {
  Tensor<float> feats;  // N x D
  std::string extractor_id;

  int64_t count() const { return feats.empty() ? 0 : feats.dim(0); }
  int64_t dim() const { return feats.empty() ? 0 : feats.dim(1); }
};

/// Fixed deterministic image embedder. The hermetic default is a frozen
/// seeded convolutional stack; any pretrained embedding network can be
/// plugged in behind this interface for externally comparable numbers.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual FeatureSet extract(const Tensor<float>& images) const = 0;  // N x 3 x H x W in [-1,1]
  virtual int64_t dim() const = 0;
  virtual std::string id() const = 0;
};

class ConvEmbedder final : public Embedder {
 public:
  ConvEmbedder(int64_t resolution, int64_t width, int64_t out_dim, uint64_t seed);
  FeatureSet extract(const Tensor<float>& images) const override;
  int64_t dim() const override { return out_dim_; }
  std::string id() const override;

 private:
  int64_t resolution_, width_, out_dim_;
  uint64_t seed_;
  mutable std::vector<nn::Conv2d<float>> convs_;
  mutable nn::Linear<float> head_;
};

/// Frechet distance between Gaussian fits of two feature sets. Covariances
/// are regularized with eps*I on both sides; the matrix square root uses a
/// symmetric eigendecomposition with negative eigenvalues clamped to zero.
double fid(const FeatureSet& a, const FeatureSet& b, double eps = 1e-6);

/// Unbiased squared MMD with the polynomial kernel (x.y / D + 1)^3,
/// diagonal terms excluded within each set. Reported raw (callers multiply
/// by 100 for table-style output).
double kid(const FeatureSet& a, const FeatureSet& b);

struct MetricReport {
  std::vector<int64_t> class_ids;
  std::vector<std::string> class_names;
  std::vector<double> class_fid, class_kid;
  std::vector<int64_t> gen_counts, real_counts;
  std::vector<int64_t> excluded_classes;  // fewer than 2 test images
  double mfid = 0, mkid = 0;
  double rc = -1, fc = -1;  // negative: not computed
  std::string extractor_id;
  int64_t iteration = -1;

  std::string to_json() const;
  std::string to_csv() const;
  void write(const std::filesystem::path& dir, const std::string& stem = "report") const;
};

/// Produces target-class translations for a batch of source images; the rng
/// supplies the per-call noise stream.
class Translator {
 public:
  virtual ~Translator() = default;
  virtual Tensor<float> translate(const Tensor<float>& sources, int64_t target_class,
                                  Rng& rng) const = 0;
};

/// Control translator: returns real test images of the target class, cycled.
class IdentityTranslator final : public Translator {
 public:
  explicit IdentityTranslator(const DatasetHandle& data) : data_(&data) {}
  Tensor<float> translate(const Tensor<float>& sources, int64_t target_class,
                          Rng& rng) const override;

 private:
  const DatasetHandle* data_;
};

struct PerClassCfg {
  int64_t n_gen_per_class = 64;  // 0: match the per-class real test count
  int64_t batch = 32;
  uint64_t seed = 9999;
};

/// For each class: translate test-split source images (cycled, fresh noise)
/// into the class, then FID/KID against that class's real test images.
/// Classes with fewer than two test images are excluded and recorded.
MetricReport per_class_metrics(const Translator& translator, const DatasetHandle& data,
                               const Embedder& embedder, const PerClassCfg& cfg);

struct ClassifierCfg {
  int64_t width = 8;
  int64_t iterations = 400;
  int64_t batch = 32;
  double lr = 1e-3;
  uint64_t seed = 123;
};

/// Small residual softmax classifier used by the RC/FC protocol.
class ResidualClassifier {
 public:
  ResidualClassifier(int64_t resolution, int64_t num_classes, const ClassifierCfg& cfg);

  void fit(const Tensor<float>& images, const std::vector<int64_t>& labels);
  std::vector<int64_t> predict(const Tensor<float>& images) const;
  double accuracy(const Tensor<float>& images, const std::vector<int64_t>& labels) const;

 private:
  int64_t num_classes_;
  ClassifierCfg cfg_;
  mutable std::vector<nn::DBlock<float>> blocks_;
  mutable nn::Linear<float> head_;
};

struct RcFcResult {
  double rc = 0;  // classifier trained on real data, evaluated on generated
  double fc = 0;  // classifier trained on generated data, evaluated on real
  double real_test_accuracy = 0;
};

/// generated_per_class[c] holds generated images labeled c; every class must
/// be present in both training sets.
RcFcResult rc_fc(const DatasetHandle& data,
                 const std::vector<Tensor<float>>& generated_per_class,
                 const ClassifierCfg& cfg);

}  // namespace deepi2i
