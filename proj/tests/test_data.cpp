#include <filesystem>
#include <fstream>
#include <set>

#include "deepi2i/data.h"
#include "doctest.h"

using namespace deepi2i;
namespace fs = std::filesystem;

namespace {

SynthSpec toy_spec() {
  SynthSpec s;
  s.num_classes = 8;
  s.per_class = 20;
  s.resolution = 32;
  s.seed = 7;
  return s;
}

fs::path fresh_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / "deepi2i_data_test" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("synthetic dataset: determinism, counts and class separation") {
  auto a = DatasetHandle::synthetic(toy_spec());
  auto b = DatasetHandle::synthetic(toy_spec());
  CHECK(a.num_samples() == 160);
  CHECK(a.vocab().size() == 8);
  for (int64_t i = 0; i < a.num_samples(); ++i)
    CHECK(a.image_of(i).data == b.image_of(i).data);  // bit-identical renders

  // per-class pixel-mean vectors pairwise distinct
  std::vector<std::array<double, 3>> means(8, {0, 0, 0});
  std::vector<int64_t> counts(8, 0);
  for (int64_t i = 0; i < a.num_samples(); ++i) {
    const auto& img = a.image_of(i);
    auto& m = means[static_cast<size_t>(a.label_of(i))];
    for (size_t j = 0; j < img.data.size(); j += 3) {
      m[0] += img.data[j];
      m[1] += img.data[j + 1];
      m[2] += img.data[j + 2];
    }
    ++counts[static_cast<size_t>(a.label_of(i))];
  }
  for (size_t c = 0; c < 8; ++c)
    for (auto& v : means[c]) v /= static_cast<double>(counts[c]) * 32 * 32;
  for (size_t i = 0; i < 8; ++i)
    for (size_t j = i + 1; j < 8; ++j) {
      const double d2 = std::pow(means[i][0] - means[j][0], 2) +
                        std::pow(means[i][1] - means[j][1], 2) +
                        std::pow(means[i][2] - means[j][2], 2);
      CHECK(d2 > 1e-4);
    }

  // offset shifts the family table: disjoint sources look different
  SynthSpec offset = toy_spec();
  offset.class_offset = 100;
  auto c = DatasetHandle::synthetic(offset);
  CHECK(c.image_of(0).data != a.image_of(0).data);

  SynthSpec bad = toy_spec();
  bad.num_classes = 1;
  CHECK_THROWS_AS(DatasetHandle::synthetic(bad), ConfigError);
  bad = toy_spec();
  bad.resolution = 8;
  CHECK_THROWS_AS(DatasetHandle::synthetic(bad), ConfigError);
}

TEST_CASE("synth spec string round-trip") {
  SynthSpec s = SynthSpec::parse("synth:classes=16,per_class=50,res=32,seed=9,offset=100");
  CHECK(s.num_classes == 16);
  CHECK(s.per_class == 50);
  CHECK(s.class_offset == 100);
  CHECK(SynthSpec::parse(s.to_string()).seed == 9);
  CHECK_THROWS_AS(SynthSpec::parse("synth:bogus=1"), ConfigError);
}

TEST_CASE("per-class 90/10 split") {
  SynthSpec s = toy_spec();
  s.per_class = 10;
  auto d = DatasetHandle::synthetic(s);
  for (int64_t c = 0; c < d.vocab().size(); ++c) {
    CHECK(d.indices_of_class(Split::kTrain, c).size() == 9);
    CHECK(d.indices_of_class(Split::kTest, c).size() == 1);
  }
  // train/test disjoint
  std::set<int64_t> train(d.indices(Split::kTrain).begin(), d.indices(Split::kTrain).end());
  for (int64_t i : d.indices(Split::kTest)) CHECK(!train.count(i));
}

TEST_CASE("subsample keeps the test split and is deterministic") {
  auto d = DatasetHandle::synthetic(toy_spec());  // 18 train per class
  auto s1 = d.subsample(0.1, 42);
  auto s2 = d.subsample(0.1, 42);
  for (int64_t c = 0; c < d.vocab().size(); ++c) {
    CHECK(s1.indices_of_class(Split::kTrain, c).size() == 2);  // round(1.8)
    CHECK(s1.indices_of_class(Split::kTest, c) == d.indices_of_class(Split::kTest, c));
  }
  CHECK(s1.indices(Split::kTrain) == s2.indices(Split::kTrain));
  auto s3 = d.subsample(1.0, 1);
  CHECK(s3.indices(Split::kTrain).size() == d.indices(Split::kTrain).size());
  CHECK_THROWS_AS(d.subsample(0.001, 1), DataError);
  CHECK_THROWS_AS(d.subsample(0.0, 1), ConfigError);
}

TEST_CASE("batch stream: epoch arithmetic, determinism, pixel range") {
  SynthSpec s = toy_spec();
  s.per_class = 25;  // 22 train per class due to round(2.5)=3 test
  auto d = DatasetHandle::synthetic(s);
  const int64_t train_n = static_cast<int64_t>(d.indices(Split::kTrain).size());

  BatchStream bs(d, Split::kTrain, 32, 11, false);
  CHECK(bs.batches_per_epoch() == train_n / 32);

  BatchStream x(d, Split::kTrain, 16, 11, false);
  BatchStream y(d, Split::kTrain, 16, 11, false);
  for (int i = 0; i < 5; ++i) {
    auto a = x.next();
    auto b = y.next();
    CHECK(a.labels == b.labels);
    CHECK(max_abs_diff(a.images, b.images) == 0.0f);
    for (int64_t j = 0; j < a.images.numel(); ++j) {
      CHECK(a.images[j] >= -1.0f);
      CHECK(a.images[j] <= 1.0f);
    }
  }

  // evaluation keeps the short final batch
  BatchStream ev(d, Split::kTest, 16, 1, false);
  const int64_t test_n = static_cast<int64_t>(d.indices(Split::kTest).size());
  CHECK(ev.batches_per_epoch() == (test_n + 15) / 16);

  CHECK_THROWS_AS(BatchStream(d, Split::kTrain, 100000, 1, false), DataError);
}

TEST_CASE("horizontal flip equals column reversal") {
  auto d = DatasetHandle::synthetic(toy_spec());
  const ImageU8& img = d.image_of(0);
  ImageU8 f = hflip(img);
  for (int64_t y = 0; y < img.h; ++y)
    for (int64_t x = 0; x < img.w; ++x)
      for (int64_t c = 0; c < 3; ++c) CHECK(f.at(y, x, c) == img.at(y, img.w - 1 - x, c));
}

TEST_CASE("materialize + from_folder round-trips the synthetic dataset") {
  SynthSpec s = toy_spec();
  s.num_classes = 3;
  s.per_class = 10;
  auto d = DatasetHandle::synthetic(s);
  auto root = fresh_dir("materialized");
  d.materialize(root);

  auto loaded = DatasetHandle::from_folder(root, 32, 99);
  CHECK(loaded.vocab().names() == d.vocab().names());  // lexicographic == generation order here
  CHECK(loaded.num_samples() == d.num_samples());
  // PNG round trip is lossless and resize at equal size is the identity
  for (int64_t i = 0; i < d.num_samples(); ++i) {
    CHECK(loaded.image_of(i).data == d.image_of(i).data);
    CHECK(loaded.label_of(i) == d.label_of(i));
  }
  // split stability: same (root, seed) twice gives the identical partition
  auto again = DatasetHandle::from_folder(root, 32, 99);
  CHECK(again.indices(Split::kTrain) == loaded.indices(Split::kTrain));
  CHECK(again.indices(Split::kTest) == loaded.indices(Split::kTest));
}

TEST_CASE("from_folder rejects empty classes and counts undecodable files") {
  auto root = fresh_dir("bad_folder");
  fs::create_directories(root / "empty_class");
  CHECK_THROWS_WITH_AS(DatasetHandle::from_folder(root, 16, 1),
                       doctest::Contains("empty_class"), DataError);

  auto root2 = fresh_dir("undecodable");
  SynthSpec s = toy_spec();
  s.num_classes = 2;
  s.per_class = 6;
  DatasetHandle::synthetic(s).materialize(root2);
  std::ofstream(root2 / "class000" / "garbage.png") << "not a png";
  auto d = DatasetHandle::from_folder(root2, 32, 1);
  CHECK(d.skipped_undecodable() == 1);
  CHECK(d.num_samples() == 12);
}

TEST_CASE("open dispatches between synth specs and folders") {
  auto d = DatasetHandle::open("synth:classes=4,per_class=8,res=16,seed=1", 16, 5);
  CHECK(d.vocab().size() == 4);
  CHECK_THROWS_AS(DatasetHandle::open("/nonexistent/path", 16, 5), DataError);
}
