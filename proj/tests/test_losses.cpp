#include <cmath>

#include "deepi2i/losses.h"
#include "deepi2i/rng.h"
#include "doctest.h"
#include "grad_check.h"

using namespace deepi2i;

namespace {

template <typename T>
HierarchicalFeatures<T> disc_pyramid(std::vector<int> levels, std::vector<Tensor<T>> feats) {
  HierarchicalFeatures<T> h;
  h.source = HierarchicalFeatures<T>::Source::kDiscriminator;
  for (size_t i = 0; i < levels.size(); ++i) h.push(levels[i], std::move(feats[i]));
  return h;
}

}  // namespace

TEST_CASE("discriminator adversarial loss: closed-form points") {
  Tensor<double> r({2}, 2.0), f({2}, -2.0);
  CHECK(adv_loss_d(AdvLossKind::kHinge, r, f) == doctest::Approx(0.0));

  Tensor<double> z({3}, 0.0);
  CHECK(adv_loss_d(AdvLossKind::kLogistic, z, z) == doctest::Approx(2.0 * std::log(2.0)));

  Tensor<double> empty({0});
  CHECK_THROWS_AS(adv_loss_d(AdvLossKind::kHinge, empty, f), ConfigError);
}

TEST_CASE("discriminator adversarial loss matches scalar-by-scalar recomputation") {
  Rng rng(17);
  Tensor<double> r({9}), f({9});
  rng.fill_normal(r, 0.3, 1.5);
  rng.fill_normal(f, -0.1, 1.5);
  for (auto kind : {AdvLossKind::kHinge, AdvLossKind::kLogistic}) {
    double expect = 0;
    for (int64_t i = 0; i < 9; ++i) {
      if (kind == AdvLossKind::kHinge) {
        expect += std::max(0.0, 1.0 - r[i]) / 9 + std::max(0.0, 1.0 + f[i]) / 9;
      } else {
        const auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
        expect += -std::log(sig(r[i])) / 9 - std::log(1.0 - sig(f[i])) / 9;
      }
    }
    CHECK(adv_loss_d(kind, r, f) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("generator adversarial loss: closed-form points and gradient") {
  Tensor<double> s3({4}, 3.0);
  CHECK(adv_loss_g(AdvLossKind::kHinge, s3) == doctest::Approx(-3.0));
  Tensor<double> z({4}, 0.0);
  CHECK(adv_loss_g(AdvLossKind::kLogistic, z) == doctest::Approx(std::log(2.0)));

  Rng rng(23);
  Tensor<double> s({7});
  rng.fill_normal(s);
  for (auto kind : {AdvLossKind::kHinge, AdvLossKind::kLogistic}) {
    Tensor<double> grad;
    adv_loss_g(kind, s, &grad);
    auto loss = [&] { return adv_loss_g(kind, s); };
    auto w = gradcheck::check_tensor(loss, s, grad, "score", 1e-6);
    CHECK_MESSAGE(w.rel_err < 1e-4, w.where);
  }

  Tensor<double> empty({0});
  CHECK_THROWS_AS(adv_loss_g(AdvLossKind::kHinge, empty), ConfigError);
}

TEST_CASE("discriminator adversarial gradients match finite differences") {
  Rng rng(29);
  Tensor<double> r({5}), f({5});
  rng.fill_normal(r, 0.2, 0.7);
  rng.fill_normal(f, -0.2, 0.7);
  for (auto kind : {AdvLossKind::kHinge, AdvLossKind::kLogistic}) {
    Tensor<double> gr, gf;
    adv_loss_d(kind, r, f, &gr, &gf);
    auto loss = [&] { return adv_loss_d(kind, r, f); };
    CHECK(gradcheck::check_tensor(loss, r, gr, "real", 1e-6).rel_err < 1e-4);
    CHECK(gradcheck::check_tensor(loss, f, gf, "fake", 1e-6).rel_err < 1e-4);
  }
}

TEST_CASE("reconstruction loss: identity, defaults, hand-computed toy") {
  Rng rng(31);
  Tensor<double> a3({1, 2, 2, 2}), a4({1, 4, 1, 1});
  rng.fill_normal(a3);
  rng.fill_normal(a4);
  auto px = disc_pyramid<double>({3, 4}, {a3, a4});

  LossConfig cfg;
  SUBCASE("identical pyramids give zero") {
    auto py = disc_pyramid<double>({3, 4}, {a3, a4});
    CHECK(rec_loss(px, py, cfg) == doctest::Approx(0.0));
  }

  SUBCASE("default weights: 0.1 everywhere except level 3 = 0.01") {
    CHECK(cfg.alpha(3) == doctest::Approx(0.01));
    CHECK(cfg.alpha(4) == doctest::Approx(0.1));
    CHECK(cfg.alpha(6) == doctest::Approx(0.1));
  }

  SUBCASE("matches the explicit per-level mean computation") {
    Tensor<double> b3 = a3, b4 = a4;
    Rng r2(37);
    r2.fill_normal(b3);
    r2.fill_normal(b4);
    auto py = disc_pyramid<double>({3, 4}, {b3, b4});
    double expect = 0;
    {
      double s = 0;
      for (int64_t i = 0; i < a3.numel(); ++i) s += std::abs(b3[i] - a3[i]);
      expect += 0.01 * s / a3.numel();
    }
    {
      double s = 0;
      for (int64_t i = 0; i < a4.numel(); ++i) s += std::abs(b4[i] - a4[i]);
      expect += 0.1 * s / a4.numel();
    }
    std::map<int, double> per_level;
    CHECK(rec_loss<double>(px, py, cfg, nullptr, &per_level) ==
          doctest::Approx(expect).epsilon(1e-12));
    CHECK(per_level.size() == 2);

    // symmetry and non-negativity
    CHECK(rec_loss(px, py, cfg) == doctest::Approx(rec_loss(py, px, cfg)));
    CHECK(rec_loss(px, py, cfg) > 0.0);
  }

  SUBCASE("level mismatch and provenance are rejected") {
    auto bad = disc_pyramid<double>({3, 5}, {a3, a4});
    CHECK_THROWS_AS(rec_loss(px, bad, cfg), ShapeError);
    HierarchicalFeatures<double> enc;
    enc.source = HierarchicalFeatures<double>::Source::kEncoder;
    enc.push(3, a3);
    enc.push(4, a4);
    CHECK_THROWS_AS(rec_loss(px, enc, cfg), ShapeError);
  }

  SUBCASE("gradient flows to the generated side only") {
    Tensor<double> b3 = a3, b4 = a4;
    Rng r2(41);
    r2.fill_normal(b3);
    r2.fill_normal(b4);
    auto py = disc_pyramid<double>({3, 4}, {b3, b4});
    HierarchicalFeatures<double> d_gen;
    rec_loss(px, py, cfg, &d_gen);
    REQUIRE(d_gen.levels.size() == 2);
    auto loss = [&] {
      auto pyv = disc_pyramid<double>({3, 4}, {b3, b4});
      return rec_loss(px, pyv, cfg);
    };
    CHECK(gradcheck::check_tensor(loss, b3, d_gen.at_level(3), "b3", 1e-6).rel_err < 1e-5);
    CHECK(gradcheck::check_tensor(loss, b4, d_gen.at_level(4), "b4", 1e-6).rel_err < 1e-5);
  }
}

TEST_CASE("total losses: weighting, ablation cases, divergence") {
  LossConfig cfg;
  cfg.lambda_adv = 1.0;
  cfg.lambda_rec = 0.0;
  LossReport r = total_losses(0.5, 0.8, 0.25, cfg);
  CHECK(r.total_g == doctest::Approx(0.5));  // reconstruction removed
  CHECK(r.total_d == doctest::Approx(0.8));

  cfg.lambda_adv = 0.0;
  cfg.lambda_rec = 1.0;
  CHECK(total_losses(0.5, 0.8, 0.25, cfg).total_g == doctest::Approx(0.25));

  cfg.lambda_adv = 1.0;
  cfg.lambda_rec = 1.0;
  CHECK(total_losses(0.5, 0.8, 0.25, cfg).total_g == doctest::Approx(0.75));

  // scaling lambda_rec by k scales the rec contribution by exactly k
  cfg.lambda_rec = 3.0;
  const double with3 = total_losses(0.5, 0.8, 0.25, cfg).total_g;
  cfg.lambda_rec = 1.0;
  const double with1 = total_losses(0.5, 0.8, 0.25, cfg).total_g;
  CHECK(with3 - 0.5 == doctest::Approx(3.0 * (with1 - 0.5)));

  CHECK_THROWS_AS(total_losses(std::nan(""), 0.0, 0.0, cfg), DivergenceError);
  try {
    total_losses(0.0, std::numeric_limits<double>::infinity(), 0.0, cfg);
    CHECK(false);
  } catch (const DivergenceError& e) {
    CHECK(std::isinf(e.last_report.adv_d));
  }
}

TEST_CASE("loss config validation") {
  LossConfig cfg;
  cfg.lambda_rec = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
