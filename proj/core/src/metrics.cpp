#include "deepi2i/metrics.h"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "deepi2i/optim.h"

namespace deepi2i {

// ---- ConvEmbedder ----

ConvEmbedder::ConvEmbedder(int64_t resolution, int64_t width, int64_t out_dim, uint64_t seed)
    : resolution_(resolution), width_(width), out_dim_(out_dim), seed_(seed) {
  if (resolution < 8) throw ConfigError("embedder needs resolution >= 8");
  Rng rng(derive_seed(seed, {0xE3BEDull}));
  int64_t ch = 3, spatial = resolution;
  int64_t out_ch = width;
  while (spatial > 4) {
    convs_.emplace_back(ch, out_ch, 3, false);
    convs_.back().init(rng);
    ch = out_ch;
    out_ch *= 2;
    spatial /= 2;
  }
  head_ = nn::Linear<float>(ch, out_dim, true, false);
  head_.init(rng);
}

std::string ConvEmbedder::id() const {
  std::ostringstream os;
  os << "conv-rand/r" << resolution_ << "w" << width_ << "d" << out_dim_ << "s" << seed_;
  return os.str();
}

FeatureSet ConvEmbedder::extract(const Tensor<float>& images) const {
  if (images.empty() || images.dim(0) == 0) throw DataError("embedder: empty input");
  if (images.dim(2) != resolution_ || images.dim(3) != resolution_)
    throw ShapeError("embedder: expected resolution " + std::to_string(resolution_));
  const int64_t n = images.dim(0);
  FeatureSet out;
  out.extractor_id = id();
  out.feats = Tensor<float>({n, out_dim_});

  const int64_t chunk = 64;
  const int64_t per = images.numel() / n;
  for (int64_t start = 0; start < n; start += chunk) {
    const int64_t take = std::min(chunk, n - start);
    Tensor<float> x({take, 3, resolution_, resolution_});
    for (int64_t i = 0; i < take * per; ++i) x[i] = images[start * per + i];
    for (auto& conv : convs_) {
      x = nn::relu(conv.forward(x, nn::kEval));
      x = nn::avg_pool2(x);
    }
    // global average pool
    const int64_t c = x.dim(1), hw = x.dim(2) * x.dim(3);
    Tensor<float> pooled({take, c});
    for (int64_t i = 0; i < take * c; ++i) {
      float s = 0;
      for (int64_t j = 0; j < hw; ++j) s += x[i * hw + j];
      pooled[i] = s / static_cast<float>(hw);
    }
    Tensor<float> f = head_.forward(pooled, nn::kEval);
    for (int64_t i = 0; i < take * out_dim_; ++i) out.feats[start * out_dim_ + i] = f[i];
  }
  return out;
}

// ---- FID / KID ----

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

void moments(const FeatureSet& s, Vec& mean, Mat& cov) {
  const int64_t n = s.count(), d = s.dim();
  Mat x(n, d);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < d; ++j) x(i, j) = static_cast<double>(s.feats[i * d + j]);
  mean = x.colwise().mean();
  Mat centered = x.rowwise() - mean.transpose();
  cov = centered.transpose() * centered / static_cast<double>(n - 1);
}

Mat psd_sqrt(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (m + m.transpose()));
  Vec vals = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

double poly3_kernel(const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& y, double d) {
  const double v = x.dot(y) / d + 1.0;
  return v * v * v;
}

}  // namespace

double fid(const FeatureSet& a, const FeatureSet& b, double eps) {
  if (a.dim() != b.dim()) throw ShapeError("fid: feature dimension mismatch");
  if (a.count() < 2 || b.count() < 2) throw DataError("fid: need at least 2 samples per set");

  Vec mu_a, mu_b;
  Mat cov_a, cov_b;
  moments(a, mu_a, cov_a);
  moments(b, mu_b, cov_b);
  cov_a.diagonal().array() += eps;
  cov_b.diagonal().array() += eps;

  const Mat root_a = psd_sqrt(cov_a);
  const Mat inner = root_a * cov_b * root_a;
  const double tr_sqrt = psd_sqrt(inner).trace();

  const double value =
      (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * tr_sqrt;
  return std::max(value, 0.0);  // clamp tiny negative round-off
}

double kid(const FeatureSet& a, const FeatureSet& b) {
  if (a.dim() != b.dim()) throw ShapeError("kid: feature dimension mismatch");
  const int64_t m = a.count(), n = b.count();
  if (m < 2 || n < 2) throw DataError("kid: need at least 2 samples per set");
  const double d = static_cast<double>(a.dim());

  Mat xa(m, a.dim()), xb(n, b.dim());
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < a.dim(); ++j) xa(i, j) = a.feats[i * a.dim() + j];
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < b.dim(); ++j) xb(i, j) = b.feats[i * b.dim() + j];

  double kaa = 0, kbb = 0, kab = 0;
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < m; ++j)
      if (i != j) kaa += poly3_kernel(xa.row(i), xa.row(j), d);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j)
      if (i != j) kbb += poly3_kernel(xb.row(i), xb.row(j), d);
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) kab += poly3_kernel(xa.row(i), xb.row(j), d);

  return kaa / (static_cast<double>(m) * (m - 1)) + kbb / (static_cast<double>(n) * (n - 1)) -
         2.0 * kab / (static_cast<double>(m) * n);
}

// ---- MetricReport ----

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["iteration"] = iteration;
  j["extractor"] = extractor_id;
  j["mfid"] = mfid;
  j["mkid"] = mkid;
  j["mkid_x100"] = mkid * 100.0;
  if (rc >= 0) j["rc"] = rc;
  if (fc >= 0) j["fc"] = fc;
  nlohmann::ordered_json cls = nlohmann::ordered_json::array();
  for (size_t i = 0; i < class_ids.size(); ++i) {
    nlohmann::ordered_json row;
    row["class"] = class_ids[i];
    row["name"] = class_names[i];
    row["fid"] = class_fid[i];
    row["kid"] = class_kid[i];
    row["kid_x100"] = class_kid[i] * 100.0;
    row["gen_count"] = gen_counts[i];
    row["real_count"] = real_counts[i];
    cls.push_back(row);
  }
  j["per_class"] = cls;
  j["excluded_classes"] = excluded_classes;
  return j.dump(2);
}

std::string MetricReport::to_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "class,name,fid,kid_x100,gen_count,real_count\n";
  for (size_t i = 0; i < class_ids.size(); ++i)
    os << class_ids[i] << ',' << class_names[i] << ',' << class_fid[i] << ','
       << class_kid[i] * 100.0 << ',' << gen_counts[i] << ',' << real_counts[i] << '\n';
  os << "aggregate,mFID=" << mfid << ",mKIDx100=" << mkid * 100.0;
  if (rc >= 0) os << ",RC=" << rc;
  if (fc >= 0) os << ",FC=" << fc;
  os << ",,\n";
  return os.str();
}

void MetricReport::write(const std::filesystem::path& dir, const std::string& stem) const {
  std::filesystem::create_directories(dir);
  std::ofstream(dir / (stem + ".json"), std::ios::trunc) << to_json() << "\n";
  std::ofstream(dir / (stem + ".csv"), std::ios::trunc) << to_csv();
}

// ---- per-class metrics ----

Tensor<float> IdentityTranslator::translate(const Tensor<float>& sources, int64_t target_class,
                                            Rng&) const {
  auto idx = data_->indices_of_class(Split::kTest, target_class);
  if (idx.empty()) throw DataError("identity translator: class has no test images");
  std::vector<int64_t> take;
  for (int64_t i = 0; i < sources.dim(0); ++i)
    take.push_back(idx[static_cast<size_t>(i % static_cast<int64_t>(idx.size()))]);
  return data_->batch_images(take);
}

MetricReport per_class_metrics(const Translator& translator, const DatasetHandle& data,
                               const Embedder& embedder, const PerClassCfg& cfg) {
  MetricReport report;
  report.extractor_id = embedder.id();
  const auto& test = data.indices(Split::kTest);
  if (test.empty()) throw DataError("per_class_metrics: empty test split");

  for (int64_t c = 0; c < data.vocab().size(); ++c) {
    const auto real_idx = data.indices_of_class(Split::kTest, c);
    if (real_idx.size() < 2) {
      std::cerr << "warning: class '" << data.vocab().name(c)
                << "' has fewer than 2 test images; excluded from mFID/mKID\n";
      report.excluded_classes.push_back(c);
      continue;
    }
    const int64_t n_gen =
        cfg.n_gen_per_class > 0 ? cfg.n_gen_per_class : static_cast<int64_t>(real_idx.size());

    FeatureSet real_feats = embedder.extract(data.batch_images(real_idx));

    Rng rng(derive_seed(cfg.seed, {0x9E7C1ull, static_cast<uint64_t>(c)}));
    Tensor<float> gen_feats_all({n_gen, embedder.dim()});
    int64_t done = 0, cursor = 0;
    while (done < n_gen) {
      const int64_t take = std::min(cfg.batch, n_gen - done);
      std::vector<int64_t> src;
      for (int64_t i = 0; i < take; ++i)
        src.push_back(test[static_cast<size_t>(cursor++ % static_cast<int64_t>(test.size()))]);
      Tensor<float> generated = translator.translate(data.batch_images(src), c, rng);
      FeatureSet f = embedder.extract(generated);
      for (int64_t i = 0; i < take * embedder.dim(); ++i)
        gen_feats_all[done * embedder.dim() + i] = f.feats[i];
      done += take;
    }
    FeatureSet gen_feats{std::move(gen_feats_all), embedder.id()};

    report.class_ids.push_back(c);
    report.class_names.push_back(data.vocab().name(c));
    report.class_fid.push_back(fid(real_feats, gen_feats));
    report.class_kid.push_back(kid(real_feats, gen_feats));
    report.gen_counts.push_back(n_gen);
    report.real_counts.push_back(static_cast<int64_t>(real_idx.size()));
  }
  if (report.class_ids.empty()) throw DataError("per_class_metrics: no class had >= 2 test images");

  double sf = 0, sk = 0;
  for (size_t i = 0; i < report.class_fid.size(); ++i) {
    sf += report.class_fid[i];
    sk += report.class_kid[i];
  }
  report.mfid = sf / static_cast<double>(report.class_fid.size());
  report.mkid = sk / static_cast<double>(report.class_kid.size());
  return report;
}

// ---- RC / FC ----

ResidualClassifier::ResidualClassifier(int64_t resolution, int64_t num_classes,
                                       const ClassifierCfg& cfg)
    : num_classes_(num_classes), cfg_(cfg) {
  Rng rng(derive_seed(cfg.seed, {0xC1A55ull}));
  int64_t ch = 3, spatial = resolution, out_ch = cfg.width;
  bool first = true;
  while (spatial > 4) {
    blocks_.emplace_back(ch, out_ch, true, !first, false);
    blocks_.back().init(rng);
    ch = out_ch;
    out_ch *= 2;
    spatial /= 2;
    first = false;
  }
  head_ = nn::Linear<float>(ch, num_classes, true, false);
  head_.init(rng);
}

namespace {

// trunk -> ReLU -> global mean pool -> linear head; trunk_pre_relu is cached
// for the backward pass when requested
Tensor<float> classifier_logits(std::vector<nn::DBlock<float>>& blocks, nn::Linear<float>& head,
                                const Tensor<float>& images, const nn::Pass& pass,
                                Tensor<float>* trunk_pre_relu = nullptr) {
  Tensor<float> x = images;
  for (auto& b : blocks) x = b.forward(x, pass);
  Tensor<float> h = nn::relu(x);
  if (trunk_pre_relu != nullptr) *trunk_pre_relu = std::move(x);
  const int64_t n = h.dim(0), c = h.dim(1), hw = h.dim(2) * h.dim(3);
  Tensor<float> pooled({n, c});
  for (int64_t i = 0; i < n * c; ++i) {
    float s = 0;
    for (int64_t j = 0; j < hw; ++j) s += h[i * hw + j];
    pooled[i] = s / static_cast<float>(hw);
  }
  return head.forward(pooled, pass);
}

}  // namespace

void ResidualClassifier::fit(const Tensor<float>& images, const std::vector<int64_t>& labels) {
  const int64_t n = images.dim(0);
  if (static_cast<int64_t>(labels.size()) != n)
    throw ShapeError("classifier fit: labels/images mismatch");
  std::vector<bool> seen(static_cast<size_t>(num_classes_), false);
  for (int64_t l : labels) {
    if (l < 0 || l >= num_classes_) throw ConfigError("classifier fit: label out of range");
    seen[static_cast<size_t>(l)] = true;
  }
  for (int64_t c = 0; c < num_classes_; ++c)
    if (!seen[static_cast<size_t>(c)])
      throw DataError("classifier fit: class " + std::to_string(c) + " absent from training set");

  std::vector<nn::ParamRef<float>> params;
  auto visit_all = [&](const nn::ParamVisitor<float>& fn) {
    for (size_t i = 0; i < blocks_.size(); ++i)
      blocks_[i].visit("block" + std::to_string(i) + ".", fn);
    head_.visit("head.", fn);
  };
  visit_all([&](const nn::ParamRef<float>& p) { params.push_back(p); });

  Adam<float> adam(cfg_.lr, 0.9, 0.999);
  Rng rng(derive_seed(cfg_.seed, {0xF17ull}));
  const int64_t per = images.numel() / n;
  const int64_t batch = std::min(cfg_.batch, n);

  std::vector<int64_t> order;
  size_t cursor = 0;
  for (int64_t it = 0; it < cfg_.iterations; ++it) {
    if (cursor + static_cast<size_t>(batch) > order.size()) {
      auto perm = rng.permutation(n);
      order.assign(perm.begin(), perm.end());
      cursor = 0;
    }
    Tensor<float> x({batch, 3, images.dim(2), images.dim(3)});
    std::vector<int64_t> y(static_cast<size_t>(batch));
    for (int64_t i = 0; i < batch; ++i) {
      const int64_t s = order[cursor++];
      for (int64_t j = 0; j < per; ++j) x[i * per + j] = images[s * per + j];
      y[static_cast<size_t>(i)] = labels[static_cast<size_t>(s)];
    }

    zero_grads(params);
    Tensor<float> trunk_out;
    Tensor<float> logits = classifier_logits(blocks_, head_, x, {true, true, true}, &trunk_out);
    // softmax cross-entropy
    Tensor<float> dlogits({batch, num_classes_});
    for (int64_t i = 0; i < batch; ++i) {
      float mx = logits[i * num_classes_];
      for (int64_t c = 1; c < num_classes_; ++c)
        mx = std::max(mx, logits[i * num_classes_ + c]);
      double denom = 0;
      for (int64_t c = 0; c < num_classes_; ++c)
        denom += std::exp(static_cast<double>(logits[i * num_classes_ + c] - mx));
      for (int64_t c = 0; c < num_classes_; ++c) {
        const double p = std::exp(static_cast<double>(logits[i * num_classes_ + c] - mx)) / denom;
        dlogits[i * num_classes_ + c] =
            static_cast<float>((p - (c == y[static_cast<size_t>(i)] ? 1.0 : 0.0)) / batch);
      }
    }
    Tensor<float> dpooled = head_.backward(dlogits, true);
    // mean pool + ReLU backward using the cached trunk output
    const int64_t cdim = trunk_out.dim(1), hw = trunk_out.dim(2) * trunk_out.dim(3);
    Tensor<float> dh(trunk_out.shape());
    for (int64_t i = 0; i < batch * cdim; ++i) {
      const float g = dpooled[i] / static_cast<float>(hw);
      for (int64_t j = 0; j < hw; ++j)
        dh[i * hw + j] = trunk_out[i * hw + j] > 0 ? g : 0.0f;
    }
    for (int64_t bi = static_cast<int64_t>(blocks_.size()) - 1; bi >= 0; --bi)
      dh = blocks_[static_cast<size_t>(bi)].backward(dh, true);
    adam.step(params);
  }
}

std::vector<int64_t> ResidualClassifier::predict(const Tensor<float>& images) const {
  const int64_t n = images.dim(0);
  std::vector<int64_t> out(static_cast<size_t>(n));
  const int64_t chunk = 64;
  const int64_t per = images.numel() / n;
  for (int64_t start = 0; start < n; start += chunk) {
    const int64_t take = std::min(chunk, n - start);
    Tensor<float> x({take, 3, images.dim(2), images.dim(3)});
    for (int64_t i = 0; i < take * per; ++i) x[i] = images[start * per + i];
    Tensor<float> logits = classifier_logits(blocks_, head_, x, nn::kEval);
    for (int64_t i = 0; i < take; ++i) {
      int64_t best = 0;
      for (int64_t c = 1; c < num_classes_; ++c)
        if (logits[i * num_classes_ + c] > logits[i * num_classes_ + best]) best = c;
      out[static_cast<size_t>(start + i)] = best;
    }
  }
  return out;
}

double ResidualClassifier::accuracy(const Tensor<float>& images,
                                    const std::vector<int64_t>& labels) const {
  auto pred = predict(images);
  int64_t hit = 0;
  for (size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == labels[i]) ++hit;
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

RcFcResult rc_fc(const DatasetHandle& data, const std::vector<Tensor<float>>& generated_per_class,
                 const ClassifierCfg& cfg) {
  const int64_t num_classes = data.vocab().size();
  if (static_cast<int64_t>(generated_per_class.size()) != num_classes)
    throw DataError("rc_fc: need one generated set per class");

  // assemble the generated training/eval set
  int64_t total_gen = 0;
  for (int64_t c = 0; c < num_classes; ++c) {
    if (generated_per_class[static_cast<size_t>(c)].empty() ||
        generated_per_class[static_cast<size_t>(c)].dim(0) == 0)
      throw DataError("rc_fc: class " + std::to_string(c) + " absent from the generated set");
    total_gen += generated_per_class[static_cast<size_t>(c)].dim(0);
  }
  const int64_t res = data.resolution();
  Tensor<float> gen_images({total_gen, 3, res, res});
  std::vector<int64_t> gen_labels;
  int64_t off = 0;
  for (int64_t c = 0; c < num_classes; ++c) {
    const Tensor<float>& g = generated_per_class[static_cast<size_t>(c)];
    for (int64_t i = 0; i < g.numel(); ++i) gen_images[off * 3 * res * res + i] = g[i];
    for (int64_t i = 0; i < g.dim(0); ++i) gen_labels.push_back(c);
    off += g.dim(0);
  }

  Tensor<float> real_train = data.batch_images(data.indices(Split::kTrain));
  auto train_labels = data.batch_labels(data.indices(Split::kTrain));
  Tensor<float> real_test = data.batch_images(data.indices(Split::kTest));
  auto test_labels = data.batch_labels(data.indices(Split::kTest));

  RcFcResult result;
  {
    ResidualClassifier real_clf(res, num_classes, cfg);
    real_clf.fit(real_train, train_labels);
    result.rc = real_clf.accuracy(gen_images, gen_labels);
    result.real_test_accuracy = real_clf.accuracy(real_test, test_labels);
  }
  {
    ResidualClassifier fake_clf(res, num_classes, cfg);
    fake_clf.fit(gen_images, gen_labels);
    result.fc = fake_clf.accuracy(real_test, test_labels);
  }
  return result;
}

}  // namespace deepi2i
