#include <vector>

#include "deepi2i/nn.h"
#include "deepi2i/rng.h"
#include "doctest.h"
#include "grad_check.h"

using namespace deepi2i;
using namespace deepi2i::nn;

namespace {

constexpr Pass kPassGrad{true, true, false};

// scalar objective: sum(probe .* layer(x)), with a fixed random probe
template <typename Layer>
struct Harness {
  Layer* layer;
  Tensor<double> x;
  Tensor<double> probe;

  double loss_of(const Tensor<double>& y) const {
    double s = 0;
    for (int64_t i = 0; i < y.numel(); ++i) s += probe[i] * y[i];
    return s;
  }
};

std::vector<ParamRef<double>> params_of(const std::function<void(const ParamVisitor<double>&)>& v) {
  std::vector<ParamRef<double>> out;
  v([&](const ParamRef<double>& p) { out.push_back(p); });
  return out;
}

void zero_grads(const std::vector<ParamRef<double>>& ps) {
  for (const auto& p : ps)
    if (p.grad) p.grad->zero();
}

}  // namespace

TEST_CASE("conv2d gradients (3x3, with and without spectral norm)") {
  for (bool sn : {false, true}) {
    CAPTURE(sn);
    Rng rng(11);
    Conv2d<double> conv(3, 5, 3, sn);
    conv.init(rng);
    Tensor<double> x({2, 3, 4, 4});
    rng.fill_normal(x);
    Tensor<double> probe({2, 5, 4, 4});
    rng.fill_normal(probe);

    auto loss = [&] {
      Conv2d<double>& c = conv;
      Tensor<double> y = c.forward(x, {true, false, false});
      double s = 0;
      for (int64_t i = 0; i < y.numel(); ++i) s += probe[i] * y[i];
      return s;
    };

    auto ps = params_of([&](const ParamVisitor<double>& f) { conv.visit("conv.", f); });
    zero_grads(ps);
    Tensor<double> y = conv.forward(x, kPassGrad);
    Tensor<double> gx = conv.backward(probe, true);

    auto w = gradcheck::check_params(loss, ps);
    CHECK_MESSAGE(w.rel_err < 1e-6, w.where, " analytic=", w.analytic, " numeric=", w.numeric);
    auto wx = gradcheck::check_tensor(loss, x, gx, "x");
    CHECK(wx.rel_err < 1e-6);
  }
}

TEST_CASE("linear gradients") {
  Rng rng(5);
  Linear<double> lin(7, 4, true, true);
  lin.init(rng);
  Tensor<double> x({3, 7});
  rng.fill_normal(x);
  Tensor<double> probe({3, 4});
  rng.fill_normal(probe);

  auto loss = [&] {
    Tensor<double> y = lin.forward(x, {true, false, false});
    double s = 0;
    for (int64_t i = 0; i < y.numel(); ++i) s += probe[i] * y[i];
    return s;
  };
  auto ps = params_of([&](const ParamVisitor<double>& f) { lin.visit("lin.", f); });
  zero_grads(ps);
  lin.forward(x, kPassGrad);
  Tensor<double> gx = lin.backward(probe, true);
  CHECK(gradcheck::check_params(loss, ps).rel_err < 1e-6);
  CHECK(gradcheck::check_tensor(loss, x, gx, "x").rel_err < 1e-6);
}

TEST_CASE("embedding gradients") {
  Rng rng(9);
  Embedding<double> emb(6, 5);
  emb.init(rng);
  std::vector<int64_t> labels{1, 4, 1};
  Tensor<double> probe({3, 5});
  rng.fill_normal(probe);

  auto loss = [&] {
    Tensor<double> y = emb.forward(labels, false);
    double s = 0;
    for (int64_t i = 0; i < y.numel(); ++i) s += probe[i] * y[i];
    return s;
  };
  auto ps = params_of([&](const ParamVisitor<double>& f) { emb.visit("emb.", f); });
  zero_grads(ps);
  emb.forward(labels, true);
  emb.backward(probe, true);
  CHECK(gradcheck::check_params(loss, ps).rel_err < 1e-6);
  CHECK_THROWS_AS(emb.forward({7}, false), ConfigError);
}

TEST_CASE("batchnorm gradients through batch statistics") {
  Rng rng(13);
  BatchNorm2d<double> bn(4);
  Tensor<double> x({3, 4, 2, 2});
  rng.fill_normal(x, 0.5, 2.0);
  Tensor<double> probe(x.shape());
  rng.fill_normal(probe);

  auto loss = [&] {
    BatchNorm2d<double> local = bn;  // avoid cache/buffer interference
    Tensor<double> y = local.forward(x, {true, false, false});
    double s = 0;
    for (int64_t i = 0; i < y.numel(); ++i) s += probe[i] * y[i];
    return s;
  };
  auto ps = params_of([&](const ParamVisitor<double>& f) { bn.visit("bn.", f); });
  zero_grads(ps);
  bn.forward(x, kPassGrad);
  Tensor<double> gx = bn.backward(probe, true);
  CHECK(gradcheck::check_params(loss, ps).rel_err < 1e-5);
  CHECK(gradcheck::check_tensor(loss, x, gx, "x").rel_err < 1e-5);
}

TEST_CASE("conditional batchnorm gradients") {
  Rng rng(17);
  ConditionalBatchNorm2d<double> cbn(4, 6, false);
  cbn.init(rng);
  Tensor<double> x({3, 4, 2, 2});
  rng.fill_normal(x, -0.2, 1.5);
  Tensor<double> cond({3, 6});
  rng.fill_normal(cond);
  Tensor<double> probe(x.shape());
  rng.fill_normal(probe);

  auto loss = [&] {
    ConditionalBatchNorm2d<double> local = cbn;
    Tensor<double> y = local.forward(x, cond, {true, false, false});
    double s = 0;
    for (int64_t i = 0; i < y.numel(); ++i) s += probe[i] * y[i];
    return s;
  };
  auto ps = params_of([&](const ParamVisitor<double>& f) { cbn.visit("cbn.", f); });
  zero_grads(ps);
  cbn.forward(x, cond, kPassGrad);
  auto [gx, gcond] = cbn.backward(probe, true);
  CHECK(gradcheck::check_params(loss, ps).rel_err < 1e-5);
  CHECK(gradcheck::check_tensor(loss, x, gx, "x").rel_err < 1e-5);
  CHECK(gradcheck::check_tensor(loss, cond, gcond, "cond").rel_err < 1e-5);
}

TEST_CASE("self-attention gradients") {
  Rng rng(23);
  SelfAttention2d<double> attn(8, false);
  attn.init(rng);
  attn.visit("", [&](const ParamRef<double>& p) {
    if (p.name == "gamma") (*p.value)[0] = 0.7;  // exercise the gated branch
  });
  Tensor<double> x({2, 8, 3, 3});
  rng.fill_normal(x);
  Tensor<double> probe(x.shape());
  rng.fill_normal(probe);

  auto loss = [&] {
    SelfAttention2d<double> local = attn;
    Tensor<double> y = local.forward(x, {true, false, false});
    double s = 0;
    for (int64_t i = 0; i < y.numel(); ++i) s += probe[i] * y[i];
    return s;
  };
  auto ps = params_of([&](const ParamVisitor<double>& f) { attn.visit("attn.", f); });
  zero_grads(ps);
  attn.forward(x, kPassGrad);
  Tensor<double> gx = attn.backward(probe, true);
  CHECK(gradcheck::check_params(loss, ps).rel_err < 1e-5);
  CHECK(gradcheck::check_tensor(loss, x, gx, "x").rel_err < 1e-5);
}

TEST_CASE("dblock gradients (input block and hidden block)") {
  for (bool pre_act : {false, true}) {
    CAPTURE(pre_act);
    Rng rng(29);
    DBlock<double> block(pre_act ? 4 : 3, 6, true, pre_act, true);
    block.init(rng);
    Tensor<double> x({2, pre_act ? 4 : 3, 4, 4});
    rng.fill_normal(x);
    Tensor<double> probe({2, 6, 2, 2});
    rng.fill_normal(probe);

    auto loss = [&] {
      DBlock<double> local = block;
      Tensor<double> y = local.forward(x, {true, false, false});
      double s = 0;
      for (int64_t i = 0; i < y.numel(); ++i) s += probe[i] * y[i];
      return s;
    };
    auto ps = params_of([&](const ParamVisitor<double>& f) { block.visit("d.", f); });
    zero_grads(ps);
    block.forward(x, kPassGrad);
    Tensor<double> gx = block.backward(probe, true);
    CHECK(gradcheck::check_params(loss, ps).rel_err < 1e-5);
    CHECK(gradcheck::check_tensor(loss, x, gx, "x").rel_err < 1e-5);
  }
}

TEST_CASE("gblock gradients") {
  Rng rng(31);
  GBlock<double> block(6, 4, 5, true);
  block.init(rng);
  Tensor<double> x({2, 6, 2, 2});
  rng.fill_normal(x);
  Tensor<double> cond({2, 5});
  rng.fill_normal(cond);
  Tensor<double> probe({2, 4, 4, 4});
  rng.fill_normal(probe);

  auto loss = [&] {
    GBlock<double> local = block;
    Tensor<double> y = local.forward(x, cond, {true, false, false});
    double s = 0;
    for (int64_t i = 0; i < y.numel(); ++i) s += probe[i] * y[i];
    return s;
  };
  auto ps = params_of([&](const ParamVisitor<double>& f) { block.visit("g.", f); });
  zero_grads(ps);
  block.forward(x, cond, kPassGrad);
  auto [gx, gcond] = block.backward(probe, true);
  CHECK(gradcheck::check_params(loss, ps).rel_err < 1e-5);
  CHECK(gradcheck::check_tensor(loss, x, gx, "x").rel_err < 1e-5);
  CHECK(gradcheck::check_tensor(loss, cond, gcond, "cond").rel_err < 1e-5);
}

TEST_CASE("pool, upsample and tanh backward identities") {
  Rng rng(37);
  Tensor<double> x({1, 2, 4, 4});
  rng.fill_normal(x);

  Tensor<double> p = avg_pool2(x);
  CHECK(p.dim(2) == 2);
  // constant image stays constant under pooling
  Tensor<double> c({1, 1, 4, 4}, 3.25);
  CHECK(avg_pool2(c)[0] == doctest::Approx(3.25));

  Tensor<double> u = upsample2(p);
  CHECK(u.dim(2) == 4);

  Tensor<double> gy({1, 2, 2, 2});
  rng.fill_normal(gy);
  Tensor<double> gx = avg_pool2_backward(gy, 4, 4);
  CHECK(gx.sum() == doctest::Approx(gy.sum()));

  Tensor<double> y = tanh_op(x);
  for (int64_t i = 0; i < y.numel(); ++i) CHECK(std::abs(y[i]) <= 1.0);
}

TEST_CASE("spectral norm keeps the top singular value near one") {
  Rng rng(41);
  Conv2d<float> conv(8, 8, 3, true);
  conv.init(rng);
  conv.weight().scale_(3.0f);
  Tensor<float> x({2, 8, 4, 4});
  rng.fill_normal(x);
  // a few training passes to converge the power iteration
  for (int i = 0; i < 8; ++i) conv.forward(x, {true, false, true});
  Tensor<float> y1 = conv.forward(x, kEval);
  // scaling the raw weight must not change the normalized output
  conv.weight().scale_(2.0f);
  Tensor<float> y2 = conv.forward(x, kEval);
  CHECK(max_abs_diff(y1, y2) < 2e-3f);
}
