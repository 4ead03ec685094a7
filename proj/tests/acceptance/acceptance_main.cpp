// Acceptance suite: one self-contained check per criterion, one PASS/FAIL
// line each. Criteria 7 and 8 train the desk-scale directional experiments
// and take the bulk of the runtime; everything else finishes in minutes.
//
//   acceptance [--criteria 1,2,...|all] [--out DIR]

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <vector>

#include "deepi2i/cli.h"
#include "deepi2i/losses.h"
#include "deepi2i/metrics.h"
#include "deepi2i/train.h"
#include "grad_check.h"

using namespace deepi2i;
namespace fs = std::filesystem;

namespace {

fs::path g_out = "acceptance_out";

fs::path fresh_dir(const std::string& name) {
  fs::path p = g_out / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<uint8_t> file_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw std::runtime_error("missing file " + p.string());
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(is), {});
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------- criterion 1

Outcome criterion_1_fusion_identity() {
  Rng rng(2024);
  double max_w0 = 0, max_w01 = 0, max_f32 = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int64_t n = 1 + rng.randint(3), c = 1 + rng.randint(8);
    const int64_t s = 1 << rng.randint(4);
    Tensor<double> phi({n, c, s, s}), lam({n, c, s, s});
    rng.fill_normal(phi, 0.0, 2.0);
    rng.fill_normal(lam, 0.0, 2.0);

    // w = 0 is bitwise at any precision
    Tensor<double> same = fuse(phi, lam, 0.0);
    max_w0 = std::max(max_w0, max_abs_diff(same, phi));
    Tensor<float> phi_f = phi.cast<float>(), lam_f = lam.cast<float>();
    Tensor<float> same_f = fuse(phi_f, lam_f, 0.0f);
    max_w0 = std::max<double>(max_w0, max_abs_diff(same_f, phi_f));

    // w = 0.1 against the arithmetic definition (1e-7 is meaningful at
    // 64-bit; the f32 path is checked bitwise against the same elementwise
    // expression evaluated in f32)
    Tensor<double> fused = fuse(phi, lam, 0.1);
    for (int64_t i = 0; i < phi.numel(); ++i)
      max_w01 = std::max(max_w01, std::abs(fused[i] - (phi[i] + 0.1 * lam[i])));
    Tensor<float> fused_f = fuse(phi_f, lam_f, 0.1f);
    for (int64_t i = 0; i < phi_f.numel(); ++i) {
      const float expect = phi_f[i] + 0.1f * lam_f[i];
      if (fused_f[i] != expect) max_f32 = std::max<double>(max_f32, 1.0);
    }
  }
  std::ostringstream os;
  os << "w=0 bitwise max|diff|=" << max_w0 << ", w=0.1 max|err|=" << max_w01
     << " (64-bit), f32 elementwise-exact=" << (max_f32 == 0 ? "yes" : "no");
  return {max_w0 == 0.0 && max_w01 < 1e-7 && max_f32 == 0.0, os.str()};
}

// ---------------------------------------------------------------- criterion 2

Outcome criterion_2_gradient_suite() {
  ArchConfig cfg;
  cfg.resolution = 4;
  cfg.base_width = 2;
  cfg.num_classes = 3;
  cfg.z_dim = 6;
  cfg.embed_dim = 4;
  cfg.num_taps = 2;
  cfg.adv_loss_kind = AdvLossKind::kLogistic;  // smooth objective for FD
  cfg.spectral_norm = true;
  cfg.attn_spatial = 2;

  auto nets = build_networks<double>(cfg, 7);
  Rng rng(99);
  const int64_t n = 2;
  Tensor<double> x({n, 3, 4, 4});
  rng.fill_uniform(x, -0.9, 0.9);
  Tensor<double> z({n, 6});
  rng.fill_normal(z);
  const std::vector<int64_t> label_src{0, 1};
  const std::vector<int64_t> label_tgt{2, 1};
  LossConfig loss;  // lambda_adv = lambda_rec = 1

  const nn::Pass eval_pass{true, false, false};
  auto objective = [&]() -> double {
    auto feats_x = nets.discriminator->discriminate(x, label_tgt, eval_pass).feats;
    auto enc = nets.encoder->encode(x, eval_pass);
    auto adapted = nets.adaptors->adapt(enc, eval_pass);
    Tensor<double> img = nets.generator->generate(&adapted, z, label_tgt, eval_pass);
    auto out = nets.discriminator->discriminate(img, label_tgt, eval_pass);
    const double adv = adv_loss_g(cfg.adv_loss_kind, out.scores);
    const double rec = rec_loss(feats_x, out.feats, loss);
    return loss.lambda_adv * adv + loss.lambda_rec * rec;
  };

  // analytic gradients via one backward chain (discriminator blocked)
  for (const auto& role : nets.roles())
    zero_grads(collect_params(nets, role));
  {
    const nn::Pass grad_pass{true, true, false};
    auto feats_x = nets.discriminator->discriminate(x, label_tgt, eval_pass).feats;
    auto enc = nets.encoder->encode(x, grad_pass);
    auto adapted = nets.adaptors->adapt(enc, grad_pass);
    Tensor<double> img = nets.generator->generate(&adapted, z, label_tgt, grad_pass);
    auto out = nets.discriminator->discriminate(img, label_tgt, grad_pass);

    Tensor<double> dscore;
    adv_loss_g(cfg.adv_loss_kind, out.scores, &dscore);
    dscore.scale_(loss.lambda_adv);
    HierarchicalFeatures<double> dfeats;
    rec_loss(feats_x, out.feats, loss, &dfeats);
    for (auto& f : dfeats.feats) f.scale_(loss.lambda_rec);

    Tensor<double> dimg = nets.discriminator->backward(dscore, &dfeats, /*param_grads=*/false);
    auto d_adapted = nets.generator->backward(dimg, true);
    auto d_enc = nets.adaptors->backward(d_adapted, true);
    nets.encoder->backward(d_enc, true);
  }

  // discriminator gradients stay exactly zero
  double d_grad_max = 0;
  nets.visit("discriminator", [&](const nn::ParamRef<double>& p) {
    if (p.grad) d_grad_max = std::max<double>(d_grad_max, p.grad->abs_max());
  });
  if (d_grad_max != 0.0)
    return {false, "discriminator received gradient " + std::to_string(d_grad_max)};

  gradcheck::Worst worst;
  int64_t checked = 0;
  double grad_l1 = 0;  // guards against a vacuous all-zero comparison
  for (const std::string role : {"encoder", "adaptors", "generator"}) {
    auto params = collect_params(nets, role);
    for (auto& p : params) {
      if (p.is_buffer) continue;
      checked += p.value->numel();
      for (int64_t i = 0; i < p.grad->numel(); ++i) grad_l1 += std::abs((*p.grad)[i]);
    }
    auto w = gradcheck::check_params(objective, params, 1e-5);
    if (w.rel_err > worst.rel_err) worst = w;
  }
  std::ostringstream os;
  os << checked << " parameters, analytic |grad| l1=" << grad_l1 << ", worst rel err "
     << worst.rel_err << (worst.where.empty() ? "" : " at " + worst.where)
     << ", discriminator grad exactly 0";
  return {worst.rel_err < 1e-3 && grad_l1 > 0, os.str()};
}

// ---------------------------------------------------------------- criterion 3

Outcome criterion_3_transfer_exactness() {
  ArchConfig cfg;
  cfg.resolution = 16;
  cfg.base_width = 4;
  cfg.num_classes = 4;
  cfg.z_dim = 12;
  cfg.embed_dim = 8;
  cfg.num_taps = 3;

  BuildOptions cgan;
  cgan.with_encoder = false;
  auto pre_nets = build_networks<float>(cfg, 31, cgan);
  std::vector<std::string> names;
  for (int64_t i = 0; i < 4; ++i) names.push_back("c" + std::to_string(i));
  Checkpoint pre = snapshot_networks(pre_nets, ClassVocabulary(names), 0, "");

  auto nets = build_networks<float>(cfg, 77);
  auto reference = build_networks<float>(cfg, 77);

  TransferMap map = build_transfer_map(pre, cfg, TransferFlags::all());
  apply_transfer(map, pre, nets);

  // sum of |target - source| over every mapped parameter
  double total_dev = 0;
  for (const auto& e : map.entries) {
    const Tensor<float>* src = pre.networks.at(e.source_network).find(e.source_name);
    nets.visit(e.target_network, [&](const nn::ParamRef<float>& p) {
      if (p.name != e.target_name) return;
      for (int64_t i = 0; i < p.value->numel(); ++i)
        total_dev += std::abs((*p.value)[i] - (*src)[i]);
    });
  }

  // encoder backbone equals discriminator backbone
  double twin_dev = 0;
  nets.visit("encoder", [&](const nn::ParamRef<float>& p) {
    nets.visit("discriminator", [&](const nn::ParamRef<float>& q) {
      if (q.name == p.name) twin_dev = std::max<double>(twin_dev, max_abs_diff(*p.value, *q.value));
    });
  });

  // encoder-target skip list is exactly the projection head
  std::set<std::string> skipped_enc;
  for (const auto& s : map.skipped)
    if (s.target_network == "encoder") skipped_enc.insert(s.source_name);
  bool head_only = !skipped_enc.empty();
  for (const auto& n : skipped_enc)
    if (n.rfind("head.", 0) != 0) head_only = false;
  ArchPlan plan = make_plan(cfg);
  size_t head_count = 0;
  for (const auto& s : plan_param_shapes(plan, "discriminator"))
    if (s.name.rfind("head.", 0) == 0) ++head_count;
  head_only = head_only && skipped_enc.size() == head_count;

  // partial flags leave unflagged networks at random init
  auto nets2 = build_networks<float>(cfg, 77);
  TransferFlags gen_only = TransferFlags::none();
  gen_only.generator = true;
  apply_transfer(build_transfer_map(pre, cfg, gen_only), pre, nets2);
  double untouched_dev = 0;
  for (const std::string role : {"encoder", "discriminator", "adaptors"}) {
    auto a = collect_params(nets2, role);
    auto b = collect_params(reference, role);
    for (size_t i = 0; i < a.size(); ++i)
      untouched_dev = std::max<double>(untouched_dev, max_abs_diff(*a[i].value, *b[i].value));
  }

  std::ostringstream os;
  os << "sum|target-source|=" << total_dev << ", twin max|diff|=" << twin_dev
     << ", head-only skips=" << (head_only ? "yes" : "no")
     << ", partial untouched max|diff|=" << untouched_dev;
  return {total_dev == 0.0 && twin_dev == 0.0 && head_only && untouched_dev == 0.0, os.str()};
}

// ---------------------------------------------------------------- criterion 4

Outcome criterion_4_freeze_invariant() {
  ArchConfig arch;
  arch.resolution = 16;
  arch.base_width = 4;
  arch.num_classes = 3;
  arch.z_dim = 12;
  arch.embed_dim = 8;
  arch.num_taps = 3;

  SynthSpec spec;
  spec.num_classes = 3;
  spec.per_class = 30;
  spec.resolution = 16;
  spec.seed = 3;
  auto data = DatasetHandle::synthetic(spec);

  auto capture = [&](Networks<float>& nets, const std::string& role) {
    std::vector<std::pair<std::string, Tensor<float>>> vals;
    nets.visit(role, [&](const nn::ParamRef<float>& p) { vals.emplace_back(p.name, *p.value); });
    return vals;
  };
  auto max_delta = [&](Networks<float>& nets, const std::string& role,
                       const std::vector<std::pair<std::string, Tensor<float>>>& ref) {
    double d = 0;
    size_t i = 0;
    nets.visit(role, [&](const nn::ParamRef<float>& p) {
      d = std::max<double>(d, max_abs_diff(*p.value, ref[i++].second));
    });
    return d;
  };

  TrainConfig tc;
  tc.total_iterations = 100;
  tc.phase1_iterations = 50;
  tc.batch_size = 8;
  tc.seed = 9;
  tc.log_every = 0;

  auto nets = build_networks<float>(arch, 21);
  TrainEngine engine(tc, std::move(nets));
  BatchStream real(data, Split::kTrain, 8, 1, false);
  BatchStream source(data, Split::kTrain, 8, 2, false);

  auto enc0 = capture(engine.nets(), "encoder");
  auto gen0 = capture(engine.nets(), "generator");
  for (int i = 0; i < 50; ++i) engine.train_step(real.next(), source.next());
  const double gen_phase1 = max_delta(engine.nets(), "generator", gen0);
  const double enc_phase1 = max_delta(engine.nets(), "encoder", enc0);

  auto enc1 = capture(engine.nets(), "encoder");
  for (int i = 0; i < 50; ++i) engine.train_step(real.next(), source.next());
  const double enc_phase2 = max_delta(engine.nets(), "encoder", enc1);
  const double gen_phase2 = max_delta(engine.nets(), "generator", gen0);

  std::ostringstream os;
  os << "phase1: max|dGen|=" << gen_phase1 << " max|dEnc|=" << enc_phase1
     << "; phase2: max|dEnc|=" << enc_phase2 << " (generator moved " << gen_phase2 << ")";
  return {gen_phase1 == 0.0 && enc_phase1 == 0.0 && enc_phase2 == 0.0 && gen_phase2 > 0.0,
          os.str()};
}

// ---------------------------------------------------------------- criterion 5

double fid_oracle_db(const FeatureSet& a, const FeatureSet& b, double eps = 1e-6);

Outcome criterion_5_metric_oracles() {
  Rng rng(55);
  std::ostringstream os;
  bool ok = true;

  // fid(X, X)
  FeatureSet x{Tensor<float>({40, 6}), "t"};
  rng.fill_normal(x.feats);
  const double self = fid(x, x);
  ok = ok && self <= 1e-6;
  os << "FID(X,X)=" << self;

  // 1-D closed form: exact sample moments (0,1) vs (1,1)
  const double s = std::sqrt(0.5);
  FeatureSet a{Tensor<float>({2, 1}), "t"}, b{Tensor<float>({2, 1}), "t"};
  a.feats[0] = static_cast<float>(-s);
  a.feats[1] = static_cast<float>(s);
  b.feats[0] = static_cast<float>(1.0 - s);
  b.feats[1] = static_cast<float>(1.0 + s);
  const double one_d = fid(a, b);
  ok = ok && std::abs(one_d - 1.0) <= 1e-6;
  os << ", 1-D case=" << one_d;

  // 5-D sets vs the independent square-root implementation
  double max_fid_dev = 0;
  for (int t = 0; t < 3; ++t) {
    FeatureSet u{Tensor<float>({50, 5}), "t"}, v{Tensor<float>({50, 5}), "t"};
    rng.fill_normal(u.feats, 0.3, 1.2);
    rng.fill_normal(v.feats, -0.2, 0.9);
    max_fid_dev = std::max(max_fid_dev, std::abs(fid(u, v) - fid_oracle_db(u, v)));
  }
  ok = ok && max_fid_dev <= 1e-8;
  os << ", FID-vs-oracle max|dev|=" << max_fid_dev;

  // KID vs brute-force double sums on <= 10-sample sets
  double max_kid_dev = 0;
  for (int t = 0; t < 3; ++t) {
    const int64_t m = 5 + t, n = 7;
    FeatureSet u{Tensor<float>({m, 4}), "t"}, v{Tensor<float>({n, 4}), "t"};
    rng.fill_normal(u.feats);
    rng.fill_normal(v.feats);
    auto kernel = [&](const FeatureSet& p, int64_t i, const FeatureSet& q, int64_t j) {
      double dot = 0;
      for (int64_t k = 0; k < 4; ++k)
        dot += static_cast<double>(p.feats[i * 4 + k]) * static_cast<double>(q.feats[j * 4 + k]);
      const double val = dot / 4.0 + 1.0;
      return val * val * val;
    };
    double kaa = 0, kbb = 0, kab = 0;
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < m; ++j)
        if (i != j) kaa += kernel(u, i, u, j);
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < n; ++j)
        if (i != j) kbb += kernel(v, i, v, j);
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) kab += kernel(u, i, v, j);
    const double brute = kaa / (static_cast<double>(m) * (m - 1)) +
                         kbb / (static_cast<double>(n) * (n - 1)) -
                         2.0 * kab / (static_cast<double>(m) * n);
    max_kid_dev = std::max(max_kid_dev, std::abs(kid(u, v) - brute));
  }
  ok = ok && max_kid_dev <= 1e-10;
  os << ", KID-vs-brute max|dev|=" << max_kid_dev;

  // mFID is the exact arithmetic mean of the per-class values
  SynthSpec spec;
  spec.num_classes = 3;
  spec.per_class = 30;
  spec.resolution = 32;
  spec.seed = 5;
  auto data = DatasetHandle::synthetic(spec);
  ConvEmbedder emb(32, 8, 16, 42);
  IdentityTranslator identity(data);
  PerClassCfg pc;
  pc.n_gen_per_class = 6;
  MetricReport report = per_class_metrics(identity, data, emb, pc);
  double mean = 0;
  for (double f : report.class_fid) mean += f;
  mean /= static_cast<double>(report.class_fid.size());
  ok = ok && report.mfid == mean;
  os << ", mFID==mean(per-class): " << (report.mfid == mean ? "exact" : "VIOLATED");

  return {ok, os.str()};
}

// ---------------------------------------------------------------- criterion 6

Outcome criterion_6_identity_control() {
  SynthSpec spec;
  spec.num_classes = 8;
  spec.per_class = 50;
  spec.resolution = 32;
  spec.seed = 7;
  auto data = DatasetHandle::synthetic(spec);

  ConvEmbedder emb(32, 16, 64, 1234);
  IdentityTranslator identity(data);
  PerClassCfg pc;
  pc.n_gen_per_class = 0;  // copy the real test set verbatim
  MetricReport report = per_class_metrics(identity, data, emb, pc);
  double max_fid = 0;
  for (double f : report.class_fid) max_fid = std::max(max_fid, f);

  std::vector<Tensor<float>> generated;
  for (int64_t c = 0; c < spec.num_classes; ++c)
    generated.push_back(data.batch_images(data.indices_of_class(Split::kTest, c)));
  ClassifierCfg ccfg;
  ccfg.width = 8;
  ccfg.iterations = 300;
  ccfg.seed = 11;
  RcFcResult r = rc_fc(data, generated, ccfg);

  std::ostringstream os;
  os << "max per-class FID=" << max_fid << ", RC=" << r.rc
     << ", real-test accuracy=" << r.real_test_accuracy;
  return {max_fid <= 1e-3 && r.rc == r.real_test_accuracy, os.str()};
}

// ------------------------------------------------------- criteria 7 and 8

// pinned desk-scale configuration for the directional experiments
struct DeskSetup {
  int64_t resolution = 32;
  int64_t width = 10;
  int64_t z_dim = 120;
  int64_t embed_dim = 32;
  int num_taps = 3;
  int64_t pretrain_iters = 2000;
  int64_t arm_iters = 800;  // within the <= 2k budget
  int64_t eval_every = 200;
  int64_t eval_n_gen = 64;
  std::vector<uint64_t> seeds{101, 102, 103};
  std::string source_data = "synth:classes=16,per_class=200,seed=11,offset=100";
  std::string target_data = "synth:classes=8,per_class=200,seed=7";
};

RunConfig desk_run_config(const DeskSetup& d, const std::string& out) {
  KvConfig kv;
  kv.set("arch.resolution", std::to_string(d.resolution));
  kv.set("arch.base_width", std::to_string(d.width));
  kv.set("arch.z_dim", std::to_string(d.z_dim));
  kv.set("arch.embed_dim", std::to_string(d.embed_dim));
  kv.set("arch.num_taps", std::to_string(d.num_taps));
  kv.set("train.eval_every", std::to_string(d.eval_every));
  kv.set("train.eval_n_gen", std::to_string(d.eval_n_gen));
  kv.set("train.log_every", "100");
  kv.set("out", out);
  return RunConfig::from_kv(kv);
}

std::map<int64_t, double> read_mfid_series(const fs::path& run_dir) {
  std::ifstream is(run_dir / "mfid_series.csv");
  if (!is) throw std::runtime_error("missing mfid series in " + run_dir.string());
  std::map<int64_t, double> series;
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    series[std::stoll(line.substr(0, comma))] = std::stod(line.substr(comma + 1));
  }
  return series;
}

struct DeskResults {
  // keyed by (seed index): mFID at 25%, 50%, 100% of the budget
  struct Arm {
    double at25 = 0, at50 = 0, final = 0;
  };
  std::vector<Arm> transfer, scratch;          // full data
  std::vector<Arm> transfer_low, scratch_low;  // 10% data
};

const DeskResults& desk_results() {
  static std::optional<DeskResults> cached;
  if (cached) return *cached;

  DeskSetup d;
  const fs::path base = g_out / "desk";
  fs::create_directories(base);

  // shared pretrained conditional GAN on the disjoint 16-class source
  const fs::path pre_ckpt = base / "pretrain" / "final.ckpt";
  if (!fs::exists(pre_ckpt)) {
    RunConfig pre = desk_run_config(d, (base / "pretrain").string());
    pre.dataset = d.source_data;
    pre.seed = 42;
    pre.train.total_iterations = d.pretrain_iters;
    pre.train.eval_every = 0;
    std::cout << "  [desk] pretraining source GAN (" << d.pretrain_iters << " iters)\n"
              << std::flush;
    cli::cmd_pretrain(pre);
  }

  DeskResults results;
  auto run_arm = [&](uint64_t seed, bool transfer, double fraction) {
    std::ostringstream name;
    name << (transfer ? "transfer" : "scratch") << "_s" << seed << "_f" << fraction;
    const fs::path dir = base / name.str();
    if (!fs::exists(dir / "mfid_series.csv")) {
      RunConfig rc = desk_run_config(d, dir.string());
      rc.dataset = d.target_data;
      rc.seed = seed;
      rc.train.seed = seed;
      rc.train.total_iterations = d.arm_iters;
      rc.data_fraction = fraction;
      rc.scratch = !transfer;
      if (transfer) rc.pretrained_path = pre_ckpt.string();
      std::cout << "  [desk] " << name.str() << " (" << d.arm_iters << " iters)\n" << std::flush;
      cli::cmd_train(rc);
    }
    auto series = read_mfid_series(dir);
    DeskResults::Arm arm;
    arm.at25 = series.at(d.arm_iters / 4);
    arm.at50 = series.at(d.arm_iters / 2);
    arm.final = series.at(d.arm_iters);
    return arm;
  };

  for (uint64_t seed : d.seeds) {
    results.transfer.push_back(run_arm(seed, true, 1.0));
    results.scratch.push_back(run_arm(seed, false, 1.0));
  }
  for (uint64_t seed : d.seeds) {
    results.transfer_low.push_back(run_arm(seed, true, 0.1));
    results.scratch_low.push_back(run_arm(seed, false, 0.1));
  }
  cached = std::move(results);
  return *cached;
}

Outcome criterion_7_transfer_benefit() {
  const DeskResults& r = desk_results();
  int early_wins = 0;
  double mean_final_t = 0, mean_final_s = 0;
  std::ostringstream os;
  for (size_t i = 0; i < r.transfer.size(); ++i) {
    const auto& t = r.transfer[i];
    const auto& s = r.scratch[i];
    const bool win = t.at25 < s.at25 && t.at50 < s.at50;
    early_wins += win ? 1 : 0;
    mean_final_t += t.final / static_cast<double>(r.transfer.size());
    mean_final_s += s.final / static_cast<double>(r.transfer.size());
    os << "seed" << i << ": 25% " << t.at25 << (t.at25 < s.at25 ? " < " : " >= ") << s.at25
       << ", 50% " << t.at50 << (t.at50 < s.at50 ? " < " : " >= ") << s.at50 << ", final "
       << t.final << " vs " << s.final << "; ";
  }
  os << "early wins " << early_wins << "/3, mean final transfer " << mean_final_t
     << " vs scratch " << mean_final_s;
  return {early_wins >= 2 && mean_final_t <= mean_final_s, os.str()};
}

Outcome criterion_8_reduced_data_trend() {
  const DeskResults& r = desk_results();
  int holds = 0;
  std::ostringstream os;
  for (size_t i = 0; i < r.transfer.size(); ++i) {
    const double gap_full =
        (r.scratch[i].final - r.transfer[i].final) / std::max(r.scratch[i].final, 1e-9);
    const double gap_low =
        (r.scratch_low[i].final - r.transfer_low[i].final) / std::max(r.scratch_low[i].final, 1e-9);
    if (gap_low >= gap_full) ++holds;
    os << "seed" << i << ": rel gap full=" << gap_full << " reduced=" << gap_low << "; ";
  }
  os << holds << "/3 seeds show an equal-or-larger relative gap at 10% data";
  return {holds >= 2, os.str()};
}

// ---------------------------------------------------------------- criterion 9

Outcome criterion_9_ablation_inventory() {
  KvConfig kv;
  kv.set("data.dataset", "synth:classes=3,per_class=20,seed=4,offset=50");
  kv.set("arch.resolution", "16");
  kv.set("arch.base_width", "4");
  kv.set("arch.z_dim", "12");
  kv.set("arch.embed_dim", "8");
  kv.set("arch.num_taps", "4");
  kv.set("train.iterations", "1");
  kv.set("metrics.n_gen_per_class", "4");
  kv.set("metrics.rcfc", "0");
  kv.set("seed", "5");
  RunConfig base = RunConfig::from_kv(kv);

  RunConfig pre = base;
  pre.dataset = "synth:classes=4,per_class=20,seed=3";
  pre.out = fresh_dir("c9_pre").string();
  const fs::path pre_ckpt = cli::cmd_pretrain(pre);

  auto variants_of = [](const fs::path& summary) {
    std::ifstream is(summary);
    std::string line;
    std::getline(is, line);
    std::vector<std::string> names;
    while (std::getline(is, line))
      if (!line.empty()) names.push_back(line.substr(0, line.find(',')));
    return names;
  };

  RunConfig adapt = base;
  adapt.out = fresh_dir("c9_adaptors").string();
  adapt.pretrained_path = pre_ckpt.string();
  adapt.sweep = "adaptors";
  const auto rows_a = variants_of(cli::cmd_ablate(adapt));
  const std::vector<std::string> expect_a{"w-3", "w-4", "w-5", "w-6", "dagger", "full"};

  RunConfig tr = base;
  tr.out = fresh_dir("c9_transfer").string();
  tr.pretrained_path = pre_ckpt.string();
  tr.sweep = "transfer";
  const auto rows_t = variants_of(cli::cmd_ablate(tr));
  const std::vector<std::string> expect_t{"scratch", "gen", "dis", "gen+dis", "enc+gen+dis"};

  std::ostringstream os;
  os << "adaptor rows: ";
  for (const auto& v : rows_a) os << v << " ";
  os << "| transfer rows: ";
  for (const auto& v : rows_t) os << v << " ";
  return {rows_a == expect_a && rows_t == expect_t, os.str()};
}

// --------------------------------------------------------------- criterion 10

Outcome criterion_10_reproducibility() {
  KvConfig kv;
  kv.set("data.dataset", "synth:classes=3,per_class=20,seed=4,offset=50");
  kv.set("arch.resolution", "16");
  kv.set("arch.base_width", "4");
  kv.set("arch.z_dim", "12");
  kv.set("arch.embed_dim", "8");
  kv.set("arch.num_taps", "3");
  kv.set("train.iterations", "6");
  kv.set("train.phase1", "2");
  kv.set("train.eval_every", "3");
  kv.set("train.eval_n_gen", "4");
  kv.set("metrics.n_gen_per_class", "4");
  kv.set("metrics.classifier_iters", "20");
  kv.set("scratch", "1");
  kv.set("seed", "5");

  kv.set("out", fresh_dir("c10_a").string());
  RunConfig first = RunConfig::from_kv(kv);
  const fs::path ckpt1 = cli::cmd_train(first);

  // re-run strictly from the written echo, only the output directory changes
  KvConfig echo = KvConfig::parse_file(fs::path(first.out) / "config_echo.cfg");
  echo.set("out", fresh_dir("c10_b").string());
  RunConfig second = RunConfig::from_kv(echo);
  const fs::path ckpt2 = cli::cmd_train(second);

  bool ok = file_bytes(ckpt1) == file_bytes(ckpt2);
  ok = ok && file_bytes(fs::path(first.out) / "mfid_series.csv") ==
                 file_bytes(fs::path(second.out) / "mfid_series.csv");
  ok = ok && file_bytes(fs::path(first.out) / "metric_snapshots.jsonl") ==
                 file_bytes(fs::path(second.out) / "metric_snapshots.jsonl");

  // evaluation reports are byte-identical as well
  RunConfig ev1 = first;
  ev1.command = "evaluate";
  ev1.checkpoint_path = ckpt1.string();
  ev1.out = fresh_dir("c10_ev_a").string();
  ev1.classifier.iterations = 20;
  cli::cmd_evaluate(ev1);
  KvConfig ev_echo = KvConfig::parse_file(fs::path(ev1.out) / "config_echo.cfg");
  ev_echo.set("out", fresh_dir("c10_ev_b").string());
  RunConfig ev2 = RunConfig::from_kv(ev_echo);
  cli::cmd_evaluate(ev2);
  ok = ok && file_bytes(fs::path(ev1.out) / "report.json") ==
                 file_bytes(fs::path(ev2.out) / "report.json");
  ok = ok && file_bytes(fs::path(ev1.out) / "report.csv") ==
                 file_bytes(fs::path(ev2.out) / "report.csv");

  return {ok, ok ? "checkpoints, snapshot series and reports byte-identical across echo re-runs"
                 : "byte mismatch between original and echo re-run"};
}

// --------------------------------------------------------------- criterion 11

Outcome criterion_11_interpolation_endpoints() {
  KvConfig kv;
  kv.set("data.dataset", "synth:classes=3,per_class=20,seed=4,offset=50");
  kv.set("arch.resolution", "16");
  kv.set("arch.base_width", "4");
  kv.set("arch.z_dim", "12");
  kv.set("arch.embed_dim", "8");
  kv.set("arch.num_taps", "3");
  kv.set("train.iterations", "4");
  kv.set("scratch", "1");
  kv.set("seed", "5");
  kv.set("out", fresh_dir("c11_train").string());
  RunConfig tr = RunConfig::from_kv(kv);
  const fs::path ckpt = cli::cmd_train(tr);

  const fs::path data_dir = fresh_dir("c11_data");
  SynthSpec spec;
  spec.num_classes = 2;
  spec.per_class = 2;
  spec.resolution = 16;
  spec.seed = 9;
  DatasetHandle::synthetic(spec).materialize(data_dir);
  const fs::path input = data_dir / "class000" / "000000.png";

  RunConfig ip = tr;
  ip.checkpoint_path = ckpt.string();
  ip.input_path = input.string();
  ip.class_a = "class050";
  ip.class_b = "class052";
  ip.steps = 6;
  ip.out = fresh_dir("c11_interp").string();
  auto strip = cli::cmd_interpolate(ip);

  RunConfig xl = tr;
  xl.checkpoint_path = ckpt.string();
  xl.input_path = input.string();
  xl.classes = "class050,class052";
  xl.n_samples = 1;
  xl.out = fresh_dir("c11_translate").string();
  cli::cmd_translate(xl);

  const bool a_ok = file_bytes(strip[0]) ==
                    file_bytes(fs::path(xl.out) / "translations" / "in0_class050_s0.png");
  const bool b_ok = file_bytes(strip[ip.steps - 1]) ==
                    file_bytes(fs::path(xl.out) / "translations" / "in0_class052_s0.png");
  return {a_ok && b_ok,
          std::string("strip[0] ") + (a_ok ? "==" : "!=") + " translate(class_a), strip[-1] " +
              (b_ok ? "==" : "!=") + " translate(class_b) (byte compare)"};
}

}  // namespace

// Denman-Beavers iteration on the covariance product: independent of the
// symmetric-eigendecomposition route used by fid().
#include <Eigen/Dense>
namespace {
double fid_oracle_db(const FeatureSet& a, const FeatureSet& b, double eps) {
  using Mat = Eigen::MatrixXd;
  auto moments = [](const FeatureSet& s, Eigen::VectorXd& mu, Mat& cov) {
    const int64_t n = s.count(), d = s.dim();
    Mat x(n, d);
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < d; ++j) x(i, j) = s.feats[i * d + j];
    mu = x.colwise().mean();
    Mat c = x.rowwise() - mu.transpose();
    cov = c.transpose() * c / static_cast<double>(n - 1);
  };
  Eigen::VectorXd mu_a, mu_b;
  Mat ca, cb;
  moments(a, mu_a, ca);
  moments(b, mu_b, cb);
  ca.diagonal().array() += eps;
  cb.diagonal().array() += eps;
  Mat y = ca * cb;
  Mat z = Mat::Identity(y.rows(), y.cols());
  for (int it = 0; it < 60; ++it) {
    const Mat yn = 0.5 * (y + z.inverse());
    const Mat zn = 0.5 * (z + y.inverse());
    y = yn;
    z = zn;
  }
  return (mu_a - mu_b).squaredNorm() + ca.trace() + cb.trace() - 2.0 * y.trace();
}
}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--criteria" && i + 1 < argc) {
      const std::string list = argv[++i];
      if (list == "all") continue;
      std::istringstream is(list);
      std::string tok;
      while (std::getline(is, tok, ',')) wanted.insert(std::stoi(tok));
    } else if (arg == "--out" && i + 1 < argc) {
      g_out = argv[++i];
    } else {
      std::cerr << "usage: acceptance [--criteria 1,2,...|all] [--out DIR]\n";
      return 2;
    }
  }
  fs::create_directories(g_out);

  struct Entry {
    int id;
    const char* name;
    Outcome (*fn)();
  };
  const std::vector<Entry> entries = {
      {1, "fusion identity", criterion_1_fusion_identity},
      {2, "gradient suite", criterion_2_gradient_suite},
      {3, "transfer exactness", criterion_3_transfer_exactness},
      {4, "freeze invariant", criterion_4_freeze_invariant},
      {5, "metric oracles", criterion_5_metric_oracles},
      {6, "identity-generator control", criterion_6_identity_control},
      {7, "desk-scale transfer benefit", criterion_7_transfer_benefit},
      {8, "reduced-data trend", criterion_8_reduced_data_trend},
      {9, "ablation harness completeness", criterion_9_ablation_inventory},
      {10, "reproducibility from config echo", criterion_10_reproducibility},
      {11, "interpolation endpoints", criterion_11_interpolation_endpoints},
  };

  int failures = 0;
  for (const auto& e : entries) {
    if (!wanted.empty() && !wanted.count(e.id)) continue;
    Outcome outcome;
    try {
      outcome = e.fn();
    } catch (const std::exception& ex) {
      outcome = {false, std::string("exception: ") + ex.what()};
    }
    std::cout << (outcome.pass ? "[PASS]" : "[FAIL]") << " criterion " << e.id << " (" << e.name
              << "): " << outcome.detail << "\n"
              << std::flush;
    if (!outcome.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
