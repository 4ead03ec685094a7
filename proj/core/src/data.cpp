#include "deepi2i/data.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace deepi2i {

// ---- SynthSpec ----

SynthSpec SynthSpec::parse(const std::string& spec) {
  const std::string prefix = "synth:";
  if (spec.rfind(prefix, 0) != 0) throw ConfigError("synthetic spec must start with 'synth:'");
  SynthSpec s;
  std::istringstream is(spec.substr(prefix.size()));
  std::string tok;
  while (std::getline(is, tok, ',')) {
    if (tok.empty()) continue;
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw ConfigError("bad synth option '" + tok + "'");
    const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
    if (key == "classes")
      s.num_classes = std::stoll(val);
    else if (key == "per_class")
      s.per_class = std::stoll(val);
    else if (key == "res")
      s.resolution = std::stoll(val);
    else if (key == "seed")
      s.seed = std::stoull(val);
    else if (key == "offset")
      s.class_offset = std::stoll(val);
    else
      throw ConfigError("unknown synth option '" + key + "'");
  }
  return s;
}

std::string SynthSpec::to_string() const {
  std::ostringstream os;
  os << "synth:classes=" << num_classes << ",per_class=" << per_class << ",res=" << resolution
     << ",seed=" << seed << ",offset=" << class_offset;
  return os.str();
}

// ---- synthetic rendering ----

namespace {

struct Rgb {
  double r, g, b;
};

Rgb hsv_to_rgb(double h, double s, double v) {
  h = h - std::floor(h);
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) {
    r = c; g = x;
  } else if (hp < 2) {
    r = x; g = c;
  } else if (hp < 3) {
    g = c; b = x;
  } else if (hp < 4) {
    g = x; b = c;
  } else if (hp < 5) {
    r = x; b = c;
  } else {
    r = c; b = x;
  }
  const double m = v - c;
  return {r + m, g + m, b + m};
}

struct ClassFamily {
  int shape;      // 0 disk, 1 ring, 2 square, 3 triangle, 4 cross, 5 diamond, 6 bars
  int satellite;  // small companion shape kind
  double sat_dist, sat_size;
  Rgb fg, bg, sat;
  double stripe_freq, stripe_angle, stripe_contrast;
  double bg_grad;  // background gradient strength along the class axis
};

double unit(uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

ClassFamily family_of(const SynthSpec& spec, int64_t cls) {
  const uint64_t g = derive_seed(spec.seed, {0xFA417ull, static_cast<uint64_t>(spec.class_offset + cls)});
  ClassFamily f;
  f.shape = static_cast<int>(mix64(g ^ 1) % 7);
  f.satellite = static_cast<int>(mix64(g ^ 11) % 6);
  f.sat_dist = 1.15 + 0.35 * unit(mix64(g ^ 12));
  f.sat_size = 0.22 + 0.16 * unit(mix64(g ^ 13));
  const double hue = unit(mix64(g ^ 2));
  f.fg = hsv_to_rgb(hue, 0.65 + 0.3 * unit(mix64(g ^ 3)), 0.75 + 0.25 * unit(mix64(g ^ 4)));
  f.bg = hsv_to_rgb(hue + 0.45 + 0.1 * unit(mix64(g ^ 5)), 0.5, 0.12 + 0.18 * unit(mix64(g ^ 6)));
  f.sat = hsv_to_rgb(hue + 0.18 + 0.12 * unit(mix64(g ^ 14)), 0.8,
                     0.75 + 0.2 * unit(mix64(g ^ 15)));
  f.stripe_freq = 3.0 + 7.0 * unit(mix64(g ^ 8));
  f.stripe_angle = 6.283185307179586 * unit(mix64(g ^ 9));
  f.stripe_contrast = 0.3 + 0.3 * unit(mix64(g ^ 10));
  f.bg_grad = 0.05 + 0.12 * unit(mix64(g ^ 16));
  return f;
}

bool inside_shape(int shape, double px, double py) {
  const double ax = std::abs(px), ay = std::abs(py);
  const double r = std::sqrt(px * px + py * py);
  switch (shape) {
    case 0: return r <= 0.8;
    case 1: return r <= 0.8 && r >= 0.45;
    case 2: return ax <= 0.7 && ay <= 0.7;
    case 3: {  // equilateral triangle, apex up
      if (py < -0.62 || py > 0.78) return false;
      return ax <= (0.78 - py) * 0.62;
    }
    case 4: return (ax <= 0.26 && ay <= 0.82) || (ay <= 0.26 && ax <= 0.82);
    case 5: return ax + ay <= 0.85;
    default: {  // bars: disk with hard stripe cutouts
      if (r > 0.85) return false;
      return std::sin(px * 3.14159265358979 * 4.0) > -0.2;
    }
  }
}

}  // namespace

ImageU8 render_synth_sample(const SynthSpec& spec, int64_t cls, int64_t sample_idx) {
  const ClassFamily fam = family_of(spec, cls);
  Rng rng(derive_seed(spec.seed, {0x5A3D1Eull, static_cast<uint64_t>(spec.class_offset + cls),
                                  static_cast<uint64_t>(sample_idx)}));
  const double cx = rng.uniform(-0.15, 0.15);
  const double cy = rng.uniform(-0.15, 0.15);
  const double scale = rng.uniform(0.5, 0.8);
  const double rot = rng.uniform(0.0, 6.283185307179586);
  const double phase = rng.uniform(0.0, 6.283185307179586);
  const double cosr = std::cos(rot), sinr = std::sin(rot);
  const double sa = std::cos(fam.stripe_angle), sb = std::sin(fam.stripe_angle);

  // satellite rides at a pose-defined angle so "same pose, different class"
  // stays meaningful
  const double sat_cx = fam.sat_dist * std::cos(rot);
  const double sat_cy = fam.sat_dist * std::sin(rot);

  const int64_t res = spec.resolution;
  const int ss = 3;  // supersampling
  ImageU8 img;
  img.h = res;
  img.w = res;
  img.data.resize(static_cast<size_t>(res * res * 3));
  for (int64_t y = 0; y < res; ++y) {
    for (int64_t x = 0; x < res; ++x) {
      double acc[3] = {0, 0, 0};
      for (int iy = 0; iy < ss; ++iy) {
        for (int ix = 0; ix < ss; ++ix) {
          const double v = ((y + (iy + 0.5) / ss) / res) * 2.0 - 1.0;
          const double u = ((x + (ix + 0.5) / ss) / res) * 2.0 - 1.0;
          // into the shape frame
          const double tx = (u - cx) / scale, ty = (v - cy) / scale;
          const double px = cosr * tx + sinr * ty;
          const double py = -sinr * tx + cosr * ty;
          Rgb col = fam.bg;
          const double gshift = fam.bg_grad * (sa * u + sb * v);
          col = {col.r + gshift, col.g + gshift, col.b + gshift};
          if (inside_shape(fam.shape, px, py)) {
            const double t = std::sin((sa * px + sb * py) * fam.stripe_freq * 3.14159265358979 +
                                      phase);
            const double m = 1.0 + fam.stripe_contrast * t;
            col = {fam.fg.r * m, fam.fg.g * m, fam.fg.b * m};
          } else {
            const double sx = (px - sat_cx) / fam.sat_size;
            const double sy = (py - sat_cy) / fam.sat_size;
            if (inside_shape(fam.satellite, sx, sy)) col = fam.sat;
          }
          acc[0] += col.r;
          acc[1] += col.g;
          acc[2] += col.b;
        }
      }
      for (int64_t c = 0; c < 3; ++c) {
        const double v = acc[c] / (ss * ss);
        img.at(y, x, c) =
            static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
      }
    }
  }
  return img;
}

// ---- DatasetHandle ----

namespace {

// per-class split: n_test = round(0.1 n) clamped to [1, n-1] for n >= 2
int64_t test_count(int64_t n) {
  if (n < 2) return 0;
  return std::clamp<int64_t>(std::llround(0.1 * static_cast<double>(n)), 1, n - 1);
}

}  // namespace

DatasetHandle DatasetHandle::from_folder(const std::filesystem::path& root, int64_t resolution,
                                         uint64_t split_seed) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw DataError("dataset root '" + root.string() + "' is not a directory");
  std::vector<std::string> class_names;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) class_names.push_back(e.path().filename().string());
  std::sort(class_names.begin(), class_names.end());
  if (class_names.empty()) throw DataError("dataset root '" + root.string() + "' has no class directories");

  auto storage = std::make_shared<Storage>();
  DatasetHandle d;
  d.resolution_ = resolution;
  std::vector<std::vector<int64_t>> per_class(class_names.size());
  for (size_t ci = 0; ci < class_names.size(); ++ci) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(root / class_names[ci])) {
      if (!e.is_regular_file()) continue;
      std::string ext = e.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
      if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp")
        files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      try {
        ImageU8 img = resize_bilinear(center_crop_square(decode_image_file(f)), resolution,
                                      resolution);
        per_class[ci].push_back(static_cast<int64_t>(storage->images.size()));
        storage->images.push_back(std::move(img));
        storage->labels.push_back(static_cast<int64_t>(ci));
      } catch (const DataError& e) {
        std::cerr << "warning: skipping undecodable file " << f << ": " << e.what() << "\n";
        ++d.skipped_;
      }
    }
    if (per_class[ci].empty())
      throw DataError("class '" + class_names[ci] + "' has no decodable images");
  }
  d.vocab_ = ClassVocabulary(class_names);
  d.storage_ = storage;
  for (size_t ci = 0; ci < per_class.size(); ++ci) {
    auto idx = per_class[ci];
    Rng rng(derive_seed(split_seed, {0x51713ull, static_cast<uint64_t>(ci)}));
    auto perm = rng.permutation(static_cast<int64_t>(idx.size()));
    const int64_t nt = test_count(static_cast<int64_t>(idx.size()));
    for (int64_t i = 0; i < static_cast<int64_t>(idx.size()); ++i) {
      const int64_t sample = idx[static_cast<size_t>(perm[static_cast<size_t>(i)])];
      (i < nt ? d.test_ : d.train_).push_back(sample);
    }
  }
  std::sort(d.train_.begin(), d.train_.end());
  std::sort(d.test_.begin(), d.test_.end());
  return d;
}

DatasetHandle DatasetHandle::synthetic(const SynthSpec& spec) {
  if (spec.num_classes < 2) throw ConfigError("synthetic dataset needs at least 2 classes");
  if (spec.resolution < 16) throw ConfigError("synthetic dataset resolution must be >= 16");
  if (spec.per_class < 2) throw ConfigError("synthetic dataset needs >= 2 samples per class");

  auto storage = std::make_shared<Storage>();
  DatasetHandle d;
  d.resolution_ = spec.resolution;
  std::vector<std::string> names;
  for (int64_t c = 0; c < spec.num_classes; ++c) {
    std::ostringstream os;
    os << "class" << std::setw(3) << std::setfill('0') << spec.class_offset + c;
    names.push_back(os.str());
  }
  d.vocab_ = ClassVocabulary(names);
  for (int64_t c = 0; c < spec.num_classes; ++c) {
    const int64_t nt = test_count(spec.per_class);
    for (int64_t i = 0; i < spec.per_class; ++i) {
      const int64_t sample = static_cast<int64_t>(storage->images.size());
      storage->images.push_back(render_synth_sample(spec, c, i));
      storage->labels.push_back(c);
      // the pose stream is already sample-indexed; the last nt go to test
      (i >= spec.per_class - nt ? d.test_ : d.train_).push_back(sample);
    }
  }
  d.storage_ = storage;
  return d;
}

DatasetHandle DatasetHandle::open(const std::string& dataset_spec, int64_t resolution,
                                  uint64_t split_seed) {
  if (dataset_spec.rfind("synth:", 0) == 0) {
    SynthSpec spec = SynthSpec::parse(dataset_spec);
    if (spec.resolution != resolution && resolution > 0) spec.resolution = resolution;
    return synthetic(spec);
  }
  return from_folder(dataset_spec, resolution, split_seed);
}

int64_t DatasetHandle::num_samples() const {
  return storage_ ? static_cast<int64_t>(storage_->images.size()) : 0;
}

const std::vector<int64_t>& DatasetHandle::indices(Split split) const {
  return split == Split::kTrain ? train_ : test_;
}

std::vector<int64_t> DatasetHandle::indices_of_class(Split split, int64_t cls) const {
  std::vector<int64_t> out;
  for (int64_t i : indices(split))
    if (storage_->labels[static_cast<size_t>(i)] == cls) out.push_back(i);
  return out;
}

int64_t DatasetHandle::label_of(int64_t index) const {
  return storage_->labels.at(static_cast<size_t>(index));
}

const ImageU8& DatasetHandle::image_of(int64_t index) const {
  return storage_->images.at(static_cast<size_t>(index));
}

DatasetHandle DatasetHandle::subsample(double fraction, uint64_t seed) const {
  if (fraction <= 0.0 || fraction > 1.0) throw ConfigError("subsample fraction must be in (0, 1]");
  DatasetHandle d = *this;
  d.train_.clear();
  for (int64_t c = 0; c < vocab_.size(); ++c) {
    auto idx = indices_of_class(Split::kTrain, c);
    const int64_t keep = std::llround(fraction * static_cast<double>(idx.size()));
    if (keep == 0)
      throw DataError("fraction " + std::to_string(fraction) + " leaves class '" +
                      vocab_.name(c) + "' empty");
    Rng rng(derive_seed(seed, {0x5B5A17ull, static_cast<uint64_t>(c)}));
    auto perm = rng.permutation(static_cast<int64_t>(idx.size()));
    for (int64_t i = 0; i < std::min<int64_t>(keep, static_cast<int64_t>(idx.size())); ++i)
      d.train_.push_back(idx[static_cast<size_t>(perm[static_cast<size_t>(i)])]);
  }
  std::sort(d.train_.begin(), d.train_.end());
  return d;
}

void DatasetHandle::materialize(const std::filesystem::path& root) const {
  for (int64_t i = 0; i < num_samples(); ++i) {
    std::ostringstream os;
    os << std::setw(6) << std::setfill('0') << i << ".png";
    encode_png(root / vocab_.name(label_of(i)) / os.str(), image_of(i));
  }
}

Tensor<float> DatasetHandle::batch_images(const std::vector<int64_t>& sample_indices,
                                          bool flip_all) const {
  const int64_t n = static_cast<int64_t>(sample_indices.size());
  Tensor<float> out({n, 3, resolution_, resolution_});
  const int64_t per = 3 * resolution_ * resolution_;
  for (int64_t i = 0; i < n; ++i) {
    const ImageU8& img = image_of(sample_indices[static_cast<size_t>(i)]);
    Tensor<float> t = image_to_tensor(flip_all ? hflip(img) : img);
    for (int64_t j = 0; j < per; ++j) out[i * per + j] = t[j];
  }
  return out;
}

std::vector<int64_t> DatasetHandle::batch_labels(const std::vector<int64_t>& sample_indices) const {
  std::vector<int64_t> out;
  out.reserve(sample_indices.size());
  for (int64_t i : sample_indices) out.push_back(label_of(i));
  return out;
}

// ---- BatchStream ----

BatchStream::BatchStream(const DatasetHandle& dataset, Split split, int64_t batch_size,
                         uint64_t seed, bool augment)
    : dataset_(&dataset), split_(split), batch_size_(batch_size), seed_(seed), augment_(augment) {
  if (batch_size_ < 1) throw ConfigError("batch size must be positive");
  const int64_t n = static_cast<int64_t>(dataset.indices(split).size());
  if (split == Split::kTrain && n < batch_size_)
    throw DataError("dataset split smaller than one batch (" + std::to_string(n) + " < " +
                    std::to_string(batch_size_) + ")");
  if (n == 0) throw DataError("empty dataset split");
  start_epoch();
}

int64_t BatchStream::batches_per_epoch() const {
  const int64_t n = static_cast<int64_t>(dataset_->indices(split_).size());
  if (split_ == Split::kTrain) return n / batch_size_;  // final short batch dropped
  return (n + batch_size_ - 1) / batch_size_;
}

void BatchStream::start_epoch() {
  ++epoch_;
  cursor_ = 0;
  const auto& base = dataset_->indices(split_);
  order_.clear();
  flip_.assign(base.size(), false);
  if (split_ == Split::kTrain) {
    Rng rng(derive_seed(seed_, {0xE70C4ull, static_cast<uint64_t>(epoch_)}));
    auto perm = rng.permutation(static_cast<int64_t>(base.size()));
    for (auto p : perm) order_.push_back(base[static_cast<size_t>(p)]);
    if (augment_)
      for (size_t i = 0; i < flip_.size(); ++i) flip_[i] = rng.uniform() < 0.5;
  } else {
    order_ = base;
  }
}

LabeledBatch<float> BatchStream::next() {
  const int64_t n = static_cast<int64_t>(order_.size());
  const bool drop_last = split_ == Split::kTrain;
  if (drop_last ? (cursor_ + static_cast<size_t>(batch_size_) > static_cast<size_t>(n))
                : (cursor_ >= static_cast<size_t>(n)))
    start_epoch();

  const int64_t take = drop_last
                           ? batch_size_
                           : std::min<int64_t>(batch_size_, n - static_cast<int64_t>(cursor_));
  LabeledBatch<float> batch;
  batch.images = Tensor<float>({take, 3, dataset_->resolution(), dataset_->resolution()});
  const int64_t per = 3 * dataset_->resolution() * dataset_->resolution();
  for (int64_t i = 0; i < take; ++i) {
    const int64_t sample = order_[cursor_];
    const ImageU8& img = dataset_->image_of(sample);
    Tensor<float> t = image_to_tensor(flip_[cursor_] ? hflip(img) : img);
    for (int64_t j = 0; j < per; ++j) batch.images[i * per + j] = t[j];
    batch.labels.push_back(dataset_->label_of(sample));
    ++cursor_;
  }
  return batch;
}

}  // namespace deepi2i
