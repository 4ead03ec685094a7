#include <cmath>
#include <filesystem>
#include <fstream>

#include "deepi2i/train.h"
#include "doctest.h"

using namespace deepi2i;
namespace fs = std::filesystem;

namespace {

ArchConfig tiny_arch(int64_t classes = 3) {
  ArchConfig cfg;
  cfg.resolution = 16;
  cfg.base_width = 4;
  cfg.num_classes = classes;
  cfg.z_dim = 12;
  cfg.embed_dim = 8;
  cfg.num_taps = 3;
  return cfg;
}

TrainConfig tiny_train(int64_t iters, int64_t phase1) {
  TrainConfig cfg;
  cfg.total_iterations = iters;
  cfg.phase1_iterations = phase1;
  cfg.batch_size = 4;
  cfg.log_every = 1;
  cfg.seed = 5;
  cfg.ema_decay = 0.99;
  return cfg;
}

DatasetHandle tiny_dataset(int64_t classes = 3) {
  SynthSpec spec;
  spec.num_classes = classes;
  spec.per_class = 12;
  spec.resolution = 16;
  spec.seed = 3;
  return DatasetHandle::synthetic(spec);
}

Checkpoint capture(Networks<float>& nets) {
  std::vector<std::string> names;
  for (int64_t i = 0; i < nets.plan.cfg.num_classes; ++i) names.push_back("c" + std::to_string(i));
  return snapshot_networks(nets, ClassVocabulary(names), 0, "");
}

double net_delta(const Checkpoint& a, const Checkpoint& b, const std::string& role) {
  const auto& na = a.networks.at(role);
  const auto& nb = b.networks.at(role);
  double d = 0;
  for (size_t i = 0; i < na.arrays.size(); ++i)
    d = std::max<double>(d, max_abs_diff(na.arrays[i].second, nb.arrays[i].second));
  return d;
}

// parameters only: power-iteration / running-stat buffers advance during
// training regardless of the step size
double param_delta(Networks<float>& nets, const Checkpoint& before, const std::string& role) {
  double d = 0;
  nets.visit(role, [&](const nn::ParamRef<float>& p) {
    if (p.is_buffer) return;
    const Tensor<float>* old = before.networks.at(role).find(p.name);
    REQUIRE(old != nullptr);
    d = std::max<double>(d, max_abs_diff(*p.value, *old));
  });
  return d;
}

fs::path fresh_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / "deepi2i_train_test" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("adam single step matches the closed form on a scalar quadratic") {
  // L(p) = 0.5 (p - t)^2, gradient p - t
  const double p0 = 2.0, target = -1.0, lr = 0.05, b1 = 0.0, b2 = 0.999, eps = 1e-8;
  Tensor<double> p({1}, p0);
  Tensor<double> g({1}, p0 - target);
  std::vector<nn::ParamRef<double>> params{{"p", &p, &g, false}};
  Adam<double> adam(lr, b1, b2, eps);
  adam.step(params);

  const double grad = p0 - target;
  const double m_hat = ((1 - b1) * grad) / (1 - b1);  // bias correction at t=1
  const double v_hat = ((1 - b2) * grad * grad) / (1 - b2);
  const double expect = p0 - lr * m_hat / (std::sqrt(v_hat) + eps);
  CHECK(std::abs(p[0] - expect) < 1e-12);

  // and with momentum enabled, two steps
  Adam<double> adam2(lr, 0.9, 0.99, eps);
  Tensor<double> q({1}, p0);
  double m = 0, v = 0, qq = p0;
  for (int t = 1; t <= 2; ++t) {
    const double gr = qq - target;
    Tensor<double> gq({1}, gr);
    std::vector<nn::ParamRef<double>> ps{{"q", &q, &gq, false}};
    adam2.step(ps);
    m = 0.9 * m + 0.1 * gr;
    v = 0.99 * v + 0.01 * gr * gr;
    const double mh = m / (1 - std::pow(0.9, t));
    const double vh = v / (1 - std::pow(0.99, t));
    qq -= lr * mh / (std::sqrt(vh) + eps);
    CHECK(std::abs(q[0] - qq) < 1e-12);
  }
}

TEST_CASE("ema_update arithmetic and convergence") {
  Tensor<float> avg({1}, 0.0f), cur({1}, 2.0f);
  ema_update(avg, cur, 0.5f);
  CHECK(avg[0] == doctest::Approx(1.0));

  Tensor<float> avg0({1}, 5.0f);
  ema_update(avg0, cur, 0.0f);
  CHECK(avg0[0] == 2.0f);  // decay 0 copies the current value

  // repeated updates converge geometrically: error = decay^k * |avg0 - p|
  Tensor<float> a({1}, 0.0f);
  const float decay = 0.75f;
  for (int k = 1; k <= 8; ++k) {
    ema_update(a, cur, decay);
    CHECK(std::abs(a[0] - 2.0f) == doctest::Approx(std::pow(decay, k) * 2.0).epsilon(1e-4));
  }

  CHECK_THROWS_AS(ema_update(a, cur, 1.0f), ConfigError);
  Tensor<float> bad({2});
  CHECK_THROWS_AS(ema_update(a, bad, 0.5f), ShapeError);
}

TEST_CASE("phase 1 trains only adaptors and discriminator") {
  auto nets = build_networks<float>(tiny_arch(), 11);
  Checkpoint before = capture(nets);
  TrainEngine engine(tiny_train(10, 10), std::move(nets));
  auto data = tiny_dataset();
  BatchStream real(data, Split::kTrain, 4, 1, false);
  BatchStream source(data, Split::kTrain, 4, 2, false);
  for (int i = 0; i < 3; ++i) {
    auto report = engine.train_step(real.next(), source.next());
    CHECK(report.phase == 1);
  }
  Checkpoint after = capture(engine.nets());
  CHECK(net_delta(before, after, "generator") == 0.0);
  CHECK(net_delta(before, after, "encoder") == 0.0);
  CHECK(net_delta(before, after, "adaptors") > 0.0);
  CHECK(net_delta(before, after, "discriminator") > 0.0);
}

TEST_CASE("phase 2 keeps the encoder bit-identical while the generator moves") {
  auto nets = build_networks<float>(tiny_arch(), 13);
  Checkpoint before = capture(nets);
  TrainEngine engine(tiny_train(10, 0), std::move(nets));
  auto data = tiny_dataset();
  BatchStream real(data, Split::kTrain, 4, 1, false);
  BatchStream source(data, Split::kTrain, 4, 2, false);
  for (int i = 0; i < 3; ++i) {
    auto report = engine.train_step(real.next(), source.next());
    CHECK(report.phase == 2);
  }
  Checkpoint after = capture(engine.nets());
  CHECK(net_delta(before, after, "encoder") == 0.0);
  CHECK(net_delta(before, after, "generator") > 0.0);
  CHECK(net_delta(before, after, "adaptors") > 0.0);
}

TEST_CASE("zero learning rates leave every parameter untouched") {
  auto nets = build_networks<float>(tiny_arch(), 17);
  Checkpoint before = capture(nets);
  TrainConfig cfg = tiny_train(4, 0);
  cfg.lr_generator = 0.0;
  cfg.lr_other = 0.0;
  TrainEngine engine(cfg, std::move(nets));
  auto data = tiny_dataset();
  BatchStream real(data, Split::kTrain, 4, 1, false);
  BatchStream source(data, Split::kTrain, 4, 2, false);
  engine.train_step(real.next(), source.next());
  for (const std::string role : {"encoder", "adaptors", "generator", "discriminator"})
    CHECK(param_delta(engine.nets(), before, role) == 0.0);
}

TEST_CASE("run_training: zero iterations returns the initialization") {
  auto data = tiny_dataset();
  TrainConfig cfg = tiny_train(0, 0);
  auto out = fresh_dir("zero_iters");
  RunResult res = run_training(tiny_arch(), cfg, data, nullptr, TransferFlags::none(), out);
  auto fresh = build_networks<float>(tiny_arch(), cfg.seed);
  Checkpoint init = capture(fresh);
  for (const std::string role : {"encoder", "adaptors", "generator", "discriminator"})
    CHECK(net_delta(init, res.final_checkpoint, role) == 0.0);
  CHECK(fs::exists(res.checkpoint_file));
}

TEST_CASE("run_training is deterministic given the seed") {
  auto data = tiny_dataset();
  TrainConfig cfg = tiny_train(5, 2);
  const auto dir_a = fresh_dir("det_a"), dir_b = fresh_dir("det_b");
  auto r1 = run_training(tiny_arch(), cfg, data, nullptr, TransferFlags::none(), dir_a);
  auto r2 = run_training(tiny_arch(), cfg, data, nullptr, TransferFlags::none(), dir_b);
  for (const std::string role : {"encoder", "adaptors", "generator", "discriminator"})
    CHECK(net_delta(r1.final_checkpoint, r2.final_checkpoint, role) == 0.0);

  std::ifstream a(dir_a / "final.ckpt", std::ios::binary);
  std::ifstream b(dir_b / "final.ckpt", std::ios::binary);
  std::vector<char> ba((std::istreambuf_iterator<char>(a)), {});
  std::vector<char> bb((std::istreambuf_iterator<char>(b)), {});
  CHECK(!ba.empty());
  CHECK(ba == bb);  // byte-identical checkpoints
}

TEST_CASE("run_training writes complete, monotone logs") {
  auto data = tiny_dataset();
  TrainConfig cfg = tiny_train(6, 2);
  cfg.log_every = 2;
  auto out = fresh_dir("logs");
  RunResult res = run_training(tiny_arch(), cfg, data, nullptr, TransferFlags::none(), out);
  REQUIRE(!res.log.empty());
  for (size_t i = 1; i < res.log.size(); ++i)
    CHECK(res.log[i].iteration > res.log[i - 1].iteration);
  // iterations 0,2,4 plus the final row (5)
  CHECK(res.log.size() == 4);
  CHECK(fs::exists(out / "training_log.csv"));
}

TEST_CASE("conditional-GAN mode trains generator and discriminator from step one") {
  BuildOptions cgan;
  cgan.with_encoder = false;
  auto nets = build_networks<float>(tiny_arch(), 19, cgan);
  Checkpoint before = capture(nets);
  TrainEngine engine(tiny_train(4, 0), std::move(nets));
  auto data = tiny_dataset();
  BatchStream real(data, Split::kTrain, 4, 1, false);
  BatchStream source(data, Split::kTrain, 4, 2, false);
  engine.train_step(real.next(), source.next());
  Checkpoint after = capture(engine.nets());
  CHECK(net_delta(before, after, "generator") > 0.0);
  CHECK(net_delta(before, after, "discriminator") > 0.0);
}

TEST_CASE("averaged generator tracks the live one") {
  auto nets = build_networks<float>(tiny_arch(), 23);
  TrainConfig cfg = tiny_train(6, 0);
  cfg.ema_decay = 0.5;
  TrainEngine engine(cfg, std::move(nets));
  auto data = tiny_dataset();
  BatchStream real(data, Split::kTrain, 4, 1, false);
  BatchStream source(data, Split::kTrain, 4, 2, false);
  for (int i = 0; i < 3; ++i) engine.train_step(real.next(), source.next());
  REQUIRE(engine.has_ema());
  Generator<float> avg = engine.ema_generator();
  // the averaged generator produces valid images
  Rng rng(1);
  Tensor<float> z({2, 12});
  rng.fill_normal(z);
  Tensor<float> y = avg.generate(nullptr, z, {0, 1}, nn::kEval);
  for (int64_t i = 0; i < y.numel(); ++i) CHECK(std::abs(y[i]) <= 1.0f);
}
