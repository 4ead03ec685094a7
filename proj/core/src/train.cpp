#include "deepi2i/train.h"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>

namespace deepi2i {

int64_t TrainConfig::resolved_phase1() const {
  if (phase1_iterations >= 0) return std::min(phase1_iterations, total_iterations);
  return total_iterations / 10;
}

void TrainConfig::validate() const {
  if (total_iterations < 0) throw ConfigError("total_iterations must be >= 0");
  if (phase1_iterations > total_iterations)
    throw ConfigError("phase1_iterations exceeds total_iterations");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  // zero learning rates are allowed (no-op updates); negative are not
  if (lr_generator < 0 || lr_other < 0) throw ConfigError("learning rates must be >= 0");
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
    throw ConfigError("Adam betas must be in [0, 1)");
  if (d_steps_per_g_step < 1) throw ConfigError("d_steps_per_g_step must be >= 1");
  if (ema_decay < 0 || ema_decay >= 1) throw ConfigError("ema_decay must be in [0, 1)");
  loss.validate();
}

TrainEngine::TrainEngine(const TrainConfig& cfg, Networks<float> nets)
    : cfg_(cfg),
      nets_(std::move(nets)),
      adam_gen_(cfg.lr_generator, cfg.beta1, cfg.beta2),
      adam_dis_(cfg.lr_other, cfg.beta1, cfg.beta2),
      adam_ada_(cfg.lr_other, cfg.beta1, cfg.beta2),
      rng_(derive_seed(cfg.seed, {0x7EA11ull})) {
  cfg_.validate();
  if (cfg_.ema_decay > 0) {
    nets_.visit("generator", [&](const nn::ParamRef<float>& p) {
      ema_.arrays.emplace_back(p.name, *p.value);
    });
  }
  advance_phase_if_needed();
}

void TrainEngine::advance_phase_if_needed() {
  const int64_t phase1 = nets_.is_i2i() ? cfg_.resolved_phase1() : 0;
  const int want = iter_ < phase1 ? 1 : 2;
  if (want != phase_) {
    phase_ = want;
    policy_ = freeze_policy(phase_);
    adam_gen_.reset();
    adam_dis_.reset();
    adam_ada_.reset();
  }
}

namespace {

bool role_trainable(const FreezePolicy& policy, bool i2i, const std::string& role) {
  if (!i2i) return role == "generator" || role == "discriminator";
  return policy.is_trainable(role);
}

}  // namespace

Tensor<float> TrainEngine::forward_translate(const Tensor<float>& images, const Tensor<float>& z,
                                             const std::vector<int64_t>& labels, bool for_update,
                                             HierarchicalFeatures<float>* adapted_out) {
  const bool i2i = nets_.is_i2i();
  if (!i2i) {
    const nn::Pass pass{true, for_update, for_update && role_trainable(policy_, i2i, "generator")};
    return nets_.generator->generate(nullptr, z, labels, pass);
  }
  // encoder is permanently frozen: no caches, no buffer updates
  auto enc_feats = nets_.encoder->encode(images, {true, false, false});
  const nn::Pass ada_pass{true, for_update, for_update && role_trainable(policy_, i2i, "adaptors")};
  auto adapted = nets_.adaptors->adapt(enc_feats, ada_pass);
  const nn::Pass gen_pass{true, for_update, for_update && role_trainable(policy_, i2i, "generator")};
  Tensor<float> out = nets_.generator->generate(&adapted, z, labels, gen_pass);
  if (adapted_out != nullptr) *adapted_out = std::move(adapted);
  return out;
}

void TrainEngine::discriminator_step(const LabeledBatch<float>& real,
                                     const LabeledBatch<float>& source) {
  advance_phase_if_needed();
  real.validate(nets_.plan.cfg);
  if (nets_.is_i2i()) source.validate(nets_.plan.cfg);
  const int64_t n = source.size();
  const int64_t z_dim = nets_.plan.cfg.z_dim;
  const int64_t num_classes = nets_.plan.cfg.num_classes;

  auto d_params = collect_params(nets_, "discriminator");
  zero_grads(d_params);

  Tensor<float> z({n, z_dim});
  rng_.fill_normal(z);
  std::vector<int64_t> c_fake(static_cast<size_t>(n));
  for (auto& c : c_fake) c = rng_.randint(num_classes);

  Tensor<float> fake = forward_translate(source.images, z, c_fake, false, nullptr);

  // one pass over real and fake together (no normalization in the trunk, so
  // scores match separate evaluation)
  const int64_t nr = real.size();
  Tensor<float> all({nr + n, 3, nets_.plan.cfg.resolution, nets_.plan.cfg.resolution});
  const int64_t per = 3 * nets_.plan.cfg.resolution * nets_.plan.cfg.resolution;
  for (int64_t i = 0; i < nr * per; ++i) all[i] = real.images[i];
  for (int64_t i = 0; i < n * per; ++i) all[nr * per + i] = fake[i];
  std::vector<int64_t> labels_all = real.labels;
  labels_all.insert(labels_all.end(), c_fake.begin(), c_fake.end());

  auto out = nets_.discriminator->discriminate(all, labels_all, {true, true, true});
  Tensor<float> s_real({nr}), s_fake({n});
  for (int64_t i = 0; i < nr; ++i) s_real[i] = out.scores[i];
  for (int64_t i = 0; i < n; ++i) s_fake[i] = out.scores[nr + i];

  Tensor<float> gr, gf;
  last_adv_d_ = adv_loss_d(cfg_.loss.adv_kind, s_real, s_fake, &gr, &gf);
  Tensor<float> dscores({nr + n});
  for (int64_t i = 0; i < nr; ++i) dscores[i] = gr[i];
  for (int64_t i = 0; i < n; ++i) dscores[nr + i] = gf[i];

  nets_.discriminator->backward(dscores, nullptr, true);
  if (cfg_.grad_clip > 0) clip_grad_norm(d_params, cfg_.grad_clip);
  adam_dis_.step(d_params);
}

LossReport TrainEngine::train_step(const LabeledBatch<float>& real,
                                   const LabeledBatch<float>& source) {
  discriminator_step(real, source);

  const bool i2i = nets_.is_i2i();
  const int64_t n = source.size();
  const int64_t z_dim = nets_.plan.cfg.z_dim;
  const int64_t num_classes = nets_.plan.cfg.num_classes;
  const bool gen_trainable = role_trainable(policy_, i2i, "generator");
  const bool ada_trainable = i2i && role_trainable(policy_, i2i, "adaptors");

  auto g_params = collect_params(nets_, "generator");
  zero_grads(g_params);
  std::vector<nn::ParamRef<float>> ada_params;
  if (i2i) {
    ada_params = collect_params(nets_, "adaptors");
    zero_grads(ada_params);
  }

  Tensor<float> z({n, z_dim});
  rng_.fill_normal(z);
  std::vector<int64_t> c_fake(static_cast<size_t>(n));
  for (auto& c : c_fake) c = rng_.randint(num_classes);

  // reconstruction targets: discriminator features of the source images,
  // taken before the grad-carrying discriminator forward
  HierarchicalFeatures<float> feats_x;
  const bool use_rec = i2i && cfg_.loss.lambda_rec > 0;
  if (use_rec)
    feats_x = nets_.discriminator->discriminate(source.images, c_fake, {true, false, false}).feats;

  HierarchicalFeatures<float> adapted;
  Tensor<float> fake = forward_translate(source.images, z, c_fake, true, i2i ? &adapted : nullptr);
  auto d_out = nets_.discriminator->discriminate(fake, c_fake, {true, true, false});

  Tensor<float> dscore;
  const double adv_g = adv_loss_g(cfg_.loss.adv_kind, d_out.scores, &dscore);
  dscore.scale_(static_cast<float>(cfg_.loss.lambda_adv));

  double rec = 0;
  std::map<int, double> per_level;
  HierarchicalFeatures<float> dfeats;
  if (use_rec) {
    rec = rec_loss(feats_x, d_out.feats, cfg_.loss, &dfeats, &per_level);
    for (auto& f : dfeats.feats) f.scale_(static_cast<float>(cfg_.loss.lambda_rec));
  }

  // discriminator parameters receive no gradient on the generator side
  Tensor<float> d_images =
      nets_.discriminator->backward(dscore, use_rec ? &dfeats : nullptr, false);
  HierarchicalFeatures<float> d_adapted = nets_.generator->backward(d_images, gen_trainable);
  if (i2i && !d_adapted.levels.empty()) nets_.adaptors->backward(d_adapted, ada_trainable);

  if (gen_trainable) {
    if (nets_.plan.cfg.use_orthogonal_reg && cfg_.loss.orthogonal_reg_strength > 0)
      add_orthogonal_reg_grad(g_params, cfg_.loss.orthogonal_reg_strength);
    if (cfg_.grad_clip > 0) clip_grad_norm(g_params, cfg_.grad_clip);
    adam_gen_.step(g_params);
    update_ema();
  }
  if (ada_trainable) {
    if (cfg_.grad_clip > 0) clip_grad_norm(ada_params, cfg_.grad_clip);
    adam_ada_.step(ada_params);
  }

  LossReport report;
  try {
    report = total_losses(adv_g, last_adv_d_, rec, cfg_.loss);
  } catch (const DivergenceError& e) {
    LossReport r = e.last_report;
    r.iteration = iter_;
    r.phase = phase_;
    throw DivergenceError(e.what(), r);
  }
  report.iteration = iter_;
  report.phase = phase_;
  report.rec_per_level = per_level;
  ++iter_;
  advance_phase_if_needed();
  return report;
}

void TrainEngine::update_ema() {
  if (ema_.arrays.empty()) return;
  ++ema_updates_;
  float decay = static_cast<float>(cfg_.ema_decay);
  if (cfg_.ema_ramp)
    decay = std::min(decay, static_cast<float>(ema_updates_ + 1) /
                                static_cast<float>(ema_updates_ + 10));
  size_t i = 0;
  nets_.visit("generator", [&](const nn::ParamRef<float>& p) {
    Tensor<float>& avg = ema_.arrays[i].second;
    if (p.is_buffer)
      avg = *p.value;  // statistics track the live generator
    else
      ema_update(avg, *p.value, decay);
    ++i;
  });
}

Generator<float> TrainEngine::ema_generator() const {
  Generator<float> g(nets_.plan);
  size_t i = 0;
  g.visit("", [&](const nn::ParamRef<float>& p) {
    if (i >= ema_.arrays.size() || ema_.arrays[i].first != p.name)
      throw CheckpointError("averaged generator arrays out of sync");
    *p.value = ema_.arrays[i].second;
    ++i;
  });
  return g;
}

// ---- run_training ----

RunResult run_training(const ArchConfig& arch, const TrainConfig& cfg,
                       const DatasetHandle& dataset, const Checkpoint* pretrained,
                       const TransferFlags& flags, const std::filesystem::path& out_dir,
                       const BuildOptions& build_opts, const SnapshotHook& snapshot) {
  arch.validate();
  cfg.validate();
  if (dataset.vocab().size() != arch.num_classes)
    throw ConfigError("dataset has " + std::to_string(dataset.vocab().size()) +
                      " classes but the architecture expects " +
                      std::to_string(arch.num_classes));
  std::filesystem::create_directories(out_dir);

  Networks<float> nets = build_networks<float>(arch, cfg.seed, build_opts);
  if (pretrained != nullptr) {
    TransferMap map = build_transfer_map(*pretrained, arch, flags);
    apply_transfer(map, *pretrained, nets);
  }
  TrainEngine engine(cfg, std::move(nets));

  std::ofstream log_csv(out_dir / "training_log.csv", std::ios::trunc);
  log_csv << "iteration,phase,adv_g,adv_d,rec,total_g,total_d,lr_generator,lr_other,"
             "wall_seconds\n";
  std::ofstream series_csv(out_dir / "mfid_series.csv", std::ios::trunc);
  series_csv << "iteration,mfid\n";

  RunResult result;
  const auto t0 = std::chrono::steady_clock::now();

  auto write_row = [&](const LossReport& r) {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    TrainLogRow row{r.iteration, r.phase, r, cfg.lr_generator, cfg.lr_other, wall};
    result.log.push_back(row);
    log_csv << r.iteration << ',' << r.phase << ',' << std::setprecision(10) << r.adv_g << ','
            << r.adv_d << ',' << r.rec << ',' << r.total_g << ',' << r.total_d << ','
            << cfg.lr_generator << ',' << cfg.lr_other << ',' << wall << '\n';
  };

  if (cfg.total_iterations > 0) {
    BatchStream real_stream(dataset, Split::kTrain, cfg.batch_size,
                            derive_seed(cfg.seed, {20}), cfg.augment);
    BatchStream source_stream(dataset, Split::kTrain, cfg.batch_size,
                              derive_seed(cfg.seed, {21}), cfg.augment);
    for (int64_t it = 0; it < cfg.total_iterations; ++it) {
      for (int d = 1; d < cfg.d_steps_per_g_step; ++d)
        engine.discriminator_step(real_stream.next(), source_stream.next());
      LossReport report = engine.train_step(real_stream.next(), source_stream.next());
      if (cfg.log_every > 0 && (it % cfg.log_every == 0 || it + 1 == cfg.total_iterations))
        write_row(report);
      const bool at_eval = cfg.eval_every > 0 && ((it + 1) % cfg.eval_every == 0 ||
                                                  it + 1 == cfg.total_iterations);
      if (at_eval && snapshot) {
        const double mfid = snapshot(engine, it + 1);
        if (std::isfinite(mfid)) {
          result.mfid_series.emplace_back(it + 1, mfid);
          series_csv << (it + 1) << ',' << std::setprecision(10) << mfid << '\n';
        }
      }
      if (cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0 &&
          it + 1 != cfg.total_iterations) {
        Checkpoint mid = snapshot_networks(engine.nets(), dataset.vocab(), it + 1,
                                           engine.rng().state(),
                                           engine.has_ema() ? &engine.ema() : nullptr);
        save_checkpoint(mid, out_dir / ("checkpoint_" + std::to_string(it + 1) + ".ckpt"));
      }
    }
  }

  result.final_checkpoint =
      snapshot_networks(engine.nets(), dataset.vocab(), engine.iteration(),
                        engine.rng().state(), engine.has_ema() ? &engine.ema() : nullptr);
  result.checkpoint_file = out_dir / "final.ckpt";
  save_checkpoint(result.final_checkpoint, result.checkpoint_file);
  return result;
}

}  // namespace deepi2i
