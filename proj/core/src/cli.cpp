#include "deepi2i/cli.h"

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "deepi2i/plot.h"

namespace deepi2i::cli {

namespace fs = std::filesystem;

// ---- CheckpointTranslator ----

CheckpointTranslator::CheckpointTranslator(const Checkpoint& ckpt, bool use_ema) {
  nets_ = std::make_shared<Networks<float>>(
      build_networks<float>(ckpt.arch, 0, ckpt.build_options()));
  restore_networks(ckpt, *nets_);
  vocab_ = ckpt.vocab;
  if (use_ema && ckpt.has_network("generator_ema")) {
    auto avg = std::make_shared<Generator<float>>(nets_->plan);
    const NamedArrays& stored = ckpt.networks.at("generator_ema");
    size_t count = 0;
    avg->visit("", [&](const nn::ParamRef<float>& p) {
      const Tensor<float>* v = stored.find(p.name);
      if (v == nullptr)
        throw CheckpointError("averaged generator missing array '" + p.name + "'");
      *p.value = *v;
      ++count;
    });
    if (count != stored.arrays.size())
      throw CheckpointError("averaged generator carries unexpected arrays");
    gen_ = std::move(avg);
  } else {
    gen_ = std::shared_ptr<Generator<float>>(nets_, nets_->generator.get());
  }
}

Tensor<float> CheckpointTranslator::translate_with_labels(
    const Tensor<float>& sources, const Tensor<float>& z,
    const std::vector<int64_t>& labels) const {
  if (nets_->encoder) {
    auto feats = nets_->encoder->encode(sources, nn::kEval);
    auto adapted = nets_->adaptors->adapt(feats, nn::kEval);
    return gen_->generate(&adapted, z, labels, nn::kEval);
  }
  return gen_->generate(nullptr, z, labels, nn::kEval);
}

Tensor<float> CheckpointTranslator::translate_with(const Tensor<float>& sources,
                                                   const Tensor<float>& z,
                                                   const Tensor<float>& embed_rows) const {
  if (nets_->encoder) {
    auto feats = nets_->encoder->encode(sources, nn::kEval);
    auto adapted = nets_->adaptors->adapt(feats, nn::kEval);
    return gen_->generate_from_embeddings(&adapted, z, embed_rows, nn::kEval);
  }
  return gen_->generate_from_embeddings(nullptr, z, embed_rows, nn::kEval);
}

Tensor<float> CheckpointTranslator::translate(const Tensor<float>& sources, int64_t target_class,
                                              Rng& rng) const {
  const int64_t n = sources.dim(0);
  Tensor<float> z({n, nets_->plan.cfg.z_dim});
  rng.fill_normal(z);
  return translate_with_labels(sources, z, std::vector<int64_t>(static_cast<size_t>(n),
                                                                target_class));
}

// ---- shared helpers ----

namespace {

constexpr uint64_t kZStreamTag = 0x7A5EEDull;

// per-(input, sample) noise row; shared by translate and interpolate so
// interpolation endpoints reuse the exact same z
Tensor<float> noise_row(uint64_t seed, int64_t input_idx, int64_t sample_idx, int64_t z_dim) {
  Rng rng(derive_seed(seed, {kZStreamTag, static_cast<uint64_t>(input_idx),
                             static_cast<uint64_t>(sample_idx)}));
  Tensor<float> z({1, z_dim});
  rng.fill_normal(z);
  return z;
}

RunConfig resolve(const RunConfig& cfg, const std::string& command, const DatasetHandle* data) {
  RunConfig c = cfg;
  c.command = command;
  if (data != nullptr && c.arch.num_classes == 0) c.arch.num_classes = data->vocab().size();
  c.train.seed = c.seed;
  c.train.loss.adv_kind = c.arch.adv_loss_kind;
  return c;
}

// engine-side metric snapshots during training
class EngineTranslator final : public Translator {
 public:
  EngineTranslator(TrainEngine& engine) : engine_(&engine) {
    if (engine.has_ema()) ema_.emplace(engine.ema_generator());
  }
  Tensor<float> translate(const Tensor<float>& sources, int64_t target_class,
                          Rng& rng) const override {
    Networks<float>& nets = engine_->nets();
    const int64_t n = sources.dim(0);
    Tensor<float> z({n, nets.plan.cfg.z_dim});
    rng.fill_normal(z);
    const std::vector<int64_t> labels(static_cast<size_t>(n), target_class);
    Generator<float>& gen = ema_ ? const_cast<Generator<float>&>(*ema_) : *nets.generator;
    if (nets.encoder) {
      auto feats = nets.encoder->encode(sources, nn::kEval);
      auto adapted = nets.adaptors->adapt(feats, nn::kEval);
      return gen.generate(&adapted, z, labels, nn::kEval);
    }
    return gen.generate(nullptr, z, labels, nn::kEval);
  }

 private:
  TrainEngine* engine_;
  mutable std::optional<Generator<float>> ema_;
};

SnapshotHook make_snapshot_hook(const RunConfig& cfg, const DatasetHandle& data,
                                std::shared_ptr<ConvEmbedder> embedder,
                                std::shared_ptr<std::ofstream> jsonl) {
  return [&data, cfg, embedder, jsonl](TrainEngine& engine, int64_t iteration) -> double {
    EngineTranslator translator(engine);
    PerClassCfg pc;
    pc.n_gen_per_class = cfg.train.eval_n_gen_per_class;
    pc.batch = std::min<int64_t>(cfg.train.batch_size, 32);
    pc.seed = cfg.train.eval_seed;
    MetricReport report = per_class_metrics(translator, data, *embedder, pc);
    report.iteration = iteration;
    nlohmann::ordered_json row;
    row["iteration"] = iteration;
    row["mfid"] = report.mfid;
    row["mkid_x100"] = report.mkid * 100.0;
    (*jsonl) << row.dump() << "\n";
    jsonl->flush();
    return report.mfid;
  };
}

RunResult run_with_snapshots(const RunConfig& c, const DatasetHandle& data,
                             const Checkpoint* pretrained, const TransferFlags& flags,
                             const BuildOptions& opts) {
  SnapshotHook hook;
  std::shared_ptr<std::ofstream> jsonl;
  std::shared_ptr<ConvEmbedder> embedder;
  if (c.train.eval_every > 0) {
    fs::create_directories(c.out);
    jsonl = std::make_shared<std::ofstream>(fs::path(c.out) / "metric_snapshots.jsonl",
                                            std::ios::trunc);
    embedder = std::make_shared<ConvEmbedder>(c.make_embedder());
    hook = make_snapshot_hook(c, data, embedder, jsonl);
  }
  return run_training(c.arch, c.train, data, pretrained, flags, c.out, opts, hook);
}

std::vector<fs::path> list_input_images(const std::string& path) {
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    for (const auto& e : fs::directory_iterator(path))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
  } else if (fs::is_regular_file(path)) {
    files.push_back(path);
  } else {
    throw DataError("input '" + path + "' is neither a file nor a directory");
  }
  if (files.empty()) throw DataError("input directory '" + path + "' is empty");
  return files;
}

Tensor<float> load_input_image(const fs::path& file, int64_t resolution) {
  ImageU8 img = resize_bilinear(center_crop_square(decode_image_file(file)), resolution,
                                resolution);
  Tensor<float> t = image_to_tensor(img);
  t.reshape({1, 3, resolution, resolution});
  return t;
}

std::vector<int64_t> resolve_classes(const std::string& spec, const ClassVocabulary& vocab) {
  std::vector<int64_t> out;
  if (spec == "all" || spec.empty()) {
    for (int64_t c = 0; c < vocab.size(); ++c) out.push_back(c);
    return out;
  }
  std::istringstream is(spec);
  std::string tok;
  while (std::getline(is, tok, ','))
    if (!tok.empty()) out.push_back(vocab.index_of(tok));
  if (out.empty()) throw ConfigError("no target classes given");
  return out;
}

}  // namespace

// ---- commands ----

std::filesystem::path cmd_pretrain(const RunConfig& cfg) {
  DatasetHandle data = cfg.open_dataset();
  RunConfig c = resolve(cfg, "pretrain", &data);
  c.train.phase1_iterations = 0;  // plain conditional GAN: no adaptor phase
  c.write_echo();

  BuildOptions opts;
  opts.with_encoder = false;
  RunResult res = run_with_snapshots(c, data, nullptr, TransferFlags::none(), opts);
  return res.checkpoint_file;
}

std::filesystem::path cmd_train(const RunConfig& cfg) {
  DatasetHandle data = cfg.open_dataset();
  RunConfig c = resolve(cfg, "train", &data);
  c.write_echo();

  Checkpoint pretrained;
  const Checkpoint* pre_ptr = nullptr;
  TransferFlags flags = TransferFlags::none();
  if (!c.scratch) {
    if (c.pretrained_path.empty())
      throw ConfigError("transfer requested but no --pretrained checkpoint given "
                        "(use --scratch for random init)");
    pretrained = load_checkpoint(c.pretrained_path);
    pre_ptr = &pretrained;
    flags = c.transfer_flags;
  }
  RunResult res = run_with_snapshots(c, data, pre_ptr, flags, c.build_options());
  return res.checkpoint_file;
}

std::vector<std::filesystem::path> cmd_translate(const RunConfig& cfg) {
  RunConfig c = resolve(cfg, "translate", nullptr);
  if (c.checkpoint_path.empty()) throw ConfigError("translate needs --checkpoint");
  if (c.input_path.empty()) throw ConfigError("translate needs --input");
  if (c.n_samples < 1) throw ConfigError("--n-samples must be >= 1");
  c.write_echo();

  Checkpoint ckpt = load_checkpoint(c.checkpoint_path);
  CheckpointTranslator translator(ckpt, c.use_ema);
  const int64_t res = ckpt.arch.resolution;
  const auto classes = resolve_classes(c.classes, ckpt.vocab);
  const auto files = list_input_images(c.input_path);

  std::vector<fs::path> written;
  std::vector<ImageU8> cells;
  const fs::path out_dir = fs::path(c.out) / "translations";
  // one input at a time: per-sample results are then independent of how many
  // inputs were given
  for (size_t i = 0; i < files.size(); ++i) {
    Tensor<float> x = load_input_image(files[i], res);
    for (int64_t cls : classes) {
      for (int64_t s = 0; s < c.n_samples; ++s) {
        Tensor<float> z =
            noise_row(c.seed, static_cast<int64_t>(i), s, ckpt.arch.z_dim);
        Tensor<float> y = translator.translate_with_labels(x, z, {cls});
        ImageU8 img = tensor_row_to_image(y, 0);
        std::ostringstream name;
        name << "in" << i << "_" << ckpt.vocab.name(cls) << "_s" << s << ".png";
        const fs::path file = out_dir / name.str();
        encode_png(file, img);
        written.push_back(file);
        cells.push_back(std::move(img));
      }
    }
  }
  // grid: rows = inputs, columns = classes (n_samples sub-columns each)
  ImageU8 grid = compose_grid(cells, static_cast<int64_t>(files.size()),
                              static_cast<int64_t>(classes.size()) * c.n_samples);
  const fs::path grid_file = fs::path(c.out) / "grid.png";
  encode_png(grid_file, grid);
  written.push_back(grid_file);
  return written;
}

std::vector<std::filesystem::path> cmd_interpolate(const RunConfig& cfg) {
  RunConfig c = resolve(cfg, "interpolate", nullptr);
  if (c.checkpoint_path.empty()) throw ConfigError("interpolate needs --checkpoint");
  if (c.input_path.empty()) throw ConfigError("interpolate needs --input");
  if (c.class_a.empty() || c.class_b.empty())
    throw ConfigError("interpolate needs --class-a and --class-b");
  if (c.steps < 2) throw ConfigError("interpolate needs --steps >= 2");
  c.write_echo();

  Checkpoint ckpt = load_checkpoint(c.checkpoint_path);
  CheckpointTranslator translator(ckpt, c.use_ema);
  const int64_t res = ckpt.arch.resolution;
  const int64_t a = ckpt.vocab.index_of(c.class_a);
  const int64_t b = ckpt.vocab.index_of(c.class_b);

  const auto files = list_input_images(c.input_path);
  Tensor<float> x = load_input_image(files.front(), res);
  Tensor<float> z = noise_row(c.seed, 0, 0, ckpt.arch.z_dim);

  Tensor<float> row_a = translator.generator().embedding().row(a);
  Tensor<float> row_b = translator.generator().embedding().row(b);

  std::vector<fs::path> written;
  std::vector<ImageU8> cells;
  for (int64_t k = 0; k < c.steps; ++k) {
    Tensor<float> rows({1, row_a.dim(1)});
    if (k == 0) {
      rows = row_a;  // exact endpoints
    } else if (k == c.steps - 1) {
      rows = row_b;
    } else {
      const float t = static_cast<float>(k) / static_cast<float>(c.steps - 1);
      for (int64_t j = 0; j < rows.dim(1); ++j)
        rows[j] = (1.0f - t) * row_a[j] + t * row_b[j];
    }
    Tensor<float> y = translator.translate_with(x, z, rows);
    ImageU8 img = tensor_row_to_image(y, 0);
    const fs::path file = fs::path(c.out) / ("step" + std::to_string(k) + ".png");
    encode_png(file, img);
    written.push_back(file);
    cells.push_back(std::move(img));
  }
  ImageU8 strip = compose_grid(cells, 1, c.steps);
  const fs::path strip_file = fs::path(c.out) / "strip.png";
  encode_png(strip_file, strip);
  written.push_back(strip_file);
  return written;
}

MetricReport cmd_evaluate(const RunConfig& cfg) {
  RunConfig c = resolve(cfg, "evaluate", nullptr);
  if (c.checkpoint_path.empty()) throw ConfigError("evaluate needs --checkpoint");
  c.write_echo();

  Checkpoint ckpt = load_checkpoint(c.checkpoint_path);
  RunConfig cd = c;
  cd.arch = ckpt.arch;  // dataset must match the checkpoint resolution
  DatasetHandle data = cd.open_dataset();
  if (!(data.vocab() == ckpt.vocab))
    throw ConfigError("dataset vocabulary disagrees with the checkpoint vocabulary");

  CheckpointTranslator translator(ckpt, c.use_ema);
  ConvEmbedder embedder(ckpt.arch.resolution, c.extractor_width, c.extractor_dim,
                        c.extractor_seed);
  PerClassCfg pc;
  pc.n_gen_per_class = c.n_gen_per_class;
  pc.batch = 32;
  pc.seed = c.seed;
  MetricReport report = per_class_metrics(translator, data, embedder, pc);
  report.iteration = ckpt.iteration;

  if (c.rcfc) {
    // generated training/eval sets for the classifier protocol
    const auto& test = data.indices(Split::kTest);
    std::vector<Tensor<float>> generated;
    for (int64_t cls = 0; cls < data.vocab().size(); ++cls) {
      const int64_t n_gen = c.n_gen_per_class > 0
                                ? c.n_gen_per_class
                                : static_cast<int64_t>(data.indices_of_class(Split::kTest, cls).size());
      Rng rng(derive_seed(c.seed, {0x2CFCull, static_cast<uint64_t>(cls)}));
      Tensor<float> gen({n_gen, 3, ckpt.arch.resolution, ckpt.arch.resolution});
      const int64_t per = 3 * ckpt.arch.resolution * ckpt.arch.resolution;
      int64_t done = 0, cursor = 0;
      while (done < n_gen) {
        const int64_t take = std::min<int64_t>(32, n_gen - done);
        std::vector<int64_t> src;
        for (int64_t i = 0; i < take; ++i)
          src.push_back(test[static_cast<size_t>(cursor++ % static_cast<int64_t>(test.size()))]);
        Tensor<float> y = translator.translate(data.batch_images(src), cls, rng);
        for (int64_t i = 0; i < take * per; ++i) gen[done * per + i] = y[i];
        done += take;
      }
      generated.push_back(std::move(gen));
    }
    RcFcResult r = rc_fc(data, generated, c.classifier);
    report.rc = r.rc;
    report.fc = r.fc;
  }
  report.write(c.out, "report");
  return report;
}

// ---- ablation harness ----

namespace {

struct Variant {
  std::string name;
  RunConfig cfg;            // per-variant run configuration
  bool use_pretrained = false;
  TransferFlags flags = TransferFlags::all();
};

std::vector<Variant> make_variants(const RunConfig& base, const std::string& sweep,
                                   bool have_pretrained) {
  std::vector<Variant> variants;
  auto push = [&](const std::string& name, RunConfig cfg, bool pre, TransferFlags flags) {
    cfg.out = (fs::path(base.out) / name).string();
    variants.push_back({name, std::move(cfg), pre, flags});
  };

  if (sweep == "adaptors") {
    ArchPlan plan = make_plan(base.arch);
    for (int level : {3, 4, 5, 6}) {
      if (!plan.has_tap(level))
        throw ConfigError("adaptor sweep needs tap levels 3..6 (num_taps=4)");
      RunConfig v = base;
      v.adaptor_mode = AdaptorMode::kLearned;
      v.adaptor_levels = {level};
      push("w-" + std::to_string(level), v, have_pretrained, TransferFlags::all());
    }
    RunConfig dagger = base;
    dagger.adaptor_mode = AdaptorMode::kChannelDuplicate;
    dagger.adaptor_levels.clear();
    push("dagger", dagger, have_pretrained, TransferFlags::all());
    RunConfig full = base;
    full.adaptor_mode = AdaptorMode::kLearned;
    full.adaptor_levels.clear();
    push("full", full, have_pretrained, TransferFlags::all());
  } else if (sweep == "transfer") {
    if (!have_pretrained) throw ConfigError("transfer sweep needs --pretrained");
    push("scratch", base, false, TransferFlags::none());
    TransferFlags gen = TransferFlags::none();
    gen.generator = true;
    push("gen", base, true, gen);
    TransferFlags dis = TransferFlags::none();
    dis.discriminator = true;
    push("dis", base, true, dis);
    TransferFlags gen_dis = TransferFlags::none();
    gen_dis.generator = gen_dis.discriminator = true;
    push("gen+dis", base, true, gen_dis);
    push("enc+gen+dis", base, true, TransferFlags::all());
  } else if (sweep == "depth") {
    // hierarchy depth: number of tap levels feeding the generator (trained
    // from scratch; the backbone shape changes with the tap count)
    for (int k = 2; k <= base.arch.num_taps; ++k) {
      RunConfig v = base;
      v.arch.num_taps = k;
      v.scratch = true;
      push("depth-" + std::to_string(k), v, false, TransferFlags::none());
    }
  } else if (sweep == "rec") {
    RunConfig off = base;
    off.train.loss.lambda_rec = 0.0;
    push("rec-0", off, have_pretrained, base.transfer_flags);
    push("rec-default", base, have_pretrained, base.transfer_flags);
  } else if (sweep == "data") {
    RunConfig reduced = base;
    reduced.data_fraction = 0.1;
    push("data-0.1", reduced, have_pretrained, base.transfer_flags);
    RunConfig full = base;
    full.data_fraction = 1.0;
    push("data-1.0", full, have_pretrained, base.transfer_flags);
  } else if (sweep == "baseline" || sweep.empty()) {
    push("baseline", base, have_pretrained, base.transfer_flags);
  } else {
    throw ConfigError("unknown sweep '" + sweep +
                      "' (adaptors|transfer|depth|rec|data|baseline)");
  }
  return variants;
}

}  // namespace

std::filesystem::path cmd_ablate(const RunConfig& cfg) {
  DatasetHandle base_data = cfg.open_dataset();
  RunConfig c = resolve(cfg, "ablate", &base_data);
  c.write_echo();

  Checkpoint pretrained;
  const bool have_pre = !c.pretrained_path.empty();
  if (have_pre) pretrained = load_checkpoint(c.pretrained_path);

  const auto variants = make_variants(c, c.sweep, have_pre);

  std::ofstream summary(fs::path(c.out) / "summary.csv", std::ios::trunc);
  summary << "variant,mfid,mkid_x100,rc,fc\n";
  std::vector<PlotSeries> curves;

  for (const auto& variant : variants) {
    std::cout << "[ablate] variant " << variant.name << "\n";
    RunConfig vc = variant.cfg;
    DatasetHandle data =
        vc.data_fraction < 1.0 || vc.dataset != c.dataset ? vc.open_dataset() : base_data;
    if (vc.data_fraction < 1.0 && vc.dataset == c.dataset)
      data = base_data.subsample(vc.data_fraction, vc.data_fraction_seed);

    RunResult res = run_with_snapshots(vc, data, variant.use_pretrained ? &pretrained : nullptr,
                                       variant.flags, vc.build_options());

    // final metrics for the summary row
    RunConfig ec = vc;
    ec.checkpoint_path = res.checkpoint_file.string();
    ec.out = (fs::path(vc.out) / "eval").string();
    MetricReport report = cmd_evaluate(ec);

    summary << variant.name << ',' << std::setprecision(10) << report.mfid << ','
            << report.mkid * 100.0 << ',' << (report.rc >= 0 ? report.rc : -1) << ','
            << (report.fc >= 0 ? report.fc : -1) << '\n';

    if (!res.mfid_series.empty()) {
      PlotSeries s;
      s.name = std::to_string(curves.size());
      for (const auto& [it, v] : res.mfid_series) s.points.emplace_back(static_cast<double>(it), v);
      curves.push_back(std::move(s));
    }
  }
  summary.close();

  if (!curves.empty())
    encode_png(fs::path(c.out) / "curves.png", line_chart(curves, "", 900, 540));

  return fs::path(c.out) / "summary.csv";
}

// ---- argument parsing ----

namespace {

struct CommonArgs {
  std::string config_file;
  std::vector<std::string> sets;
  KvConfig overrides;
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config_file, "key=value config file");
  sub->add_option("--set", args.sets, "override any config key (key=value)")->take_all();
  auto opt = [&args, sub](const std::string& flag, const std::string& key,
                          const std::string& help) {
    sub->add_option_function<std::string>(
        flag, [&args, key](const std::string& v) { args.overrides.set(key, v); }, help);
  };
  opt("--seed", "seed", "run seed");
  opt("--out", "out", "output directory");
  opt("--dataset", "data.dataset", "dataset folder or synth:... spec");
  opt("--checkpoint", "checkpoint", "checkpoint to load");
  opt("--pretrained", "pretrained", "pretrained GAN checkpoint for transfer");
  opt("--transfer-flags", "transfer.flags", "networks to initialize: enc,gen,dis|all|none");
  opt("--adaptor-levels", "adaptors.levels", "active adaptor levels, e.g. 3,4,5,6");
  opt("--lambda-rec", "loss.lambda_rec", "reconstruction loss weight");
  opt("--data-fraction", "data.fraction", "per-class train subsample fraction");
  opt("--n-gen-per-class", "metrics.n_gen_per_class", "generated images per class");
  opt("--iterations", "train.iterations", "training iterations");
  opt("--resolution", "arch.resolution", "image resolution");
  opt("--base-width", "arch.base_width", "channel base width");
  opt("--materialize-dataset", "data.materialize", "write the dataset as PNG folders");
  sub->add_flag_function(
      "--scratch", [&args](int64_t) { args.overrides.set("scratch", "1"); },
      "train from random init (no transfer)");
  sub->add_flag_function(
      "--no-ema", [&args](int64_t) { args.overrides.set("metrics.use_ema", "0"); },
      "use the live generator instead of the averaged one");
  sub->add_flag_function(
      "--no-rcfc", [&args](int64_t) { args.overrides.set("metrics.rcfc", "0"); },
      "skip the RC/FC classifier protocol");
}

RunConfig build_config(const CommonArgs& args, const std::string& command) {
  KvConfig kv;
  if (!args.config_file.empty()) kv = KvConfig::parse_file(args.config_file);
  for (const auto& s : args.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    kv.set(s.substr(0, eq), s.substr(eq + 1));
  }
  kv.merge(args.overrides);
  kv.set("command", command);
  return RunConfig::from_kv(kv);
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"deepi2i: hierarchical class-conditional image-to-image translation"};
  app.require_subcommand(1);
  app.footer(
      "Config keys (see --set / config files): seed, out, data.dataset, data.fraction,\n"
      "data.split_seed, data.augment, arch.resolution, arch.base_width, arch.num_classes,\n"
      "arch.z_dim, arch.embed_dim, arch.num_taps, arch.adv_loss, arch.spectral_norm,\n"
      "arch.attn_spatial, arch.orthogonal_reg, arch.fusion_weight[.L], train.iterations,\n"
      "train.phase1, train.batch, train.lr_generator, train.lr_other, train.beta1/2,\n"
      "train.d_steps, train.ema, train.log_every, train.checkpoint_every, train.eval_every,\n"
      "train.eval_n_gen, train.eval_seed, train.grad_clip, loss.lambda_adv, loss.lambda_rec,\n"
      "loss.alpha.L, loss.rec_mode, loss.orth_strength, adaptors.mode, adaptors.levels,\n"
      "transfer.flags, scratch, checkpoint, pretrained, metrics.n_gen_per_class,\n"
      "metrics.rcfc, metrics.use_ema, metrics.extractor_*, metrics.classifier_*,\n"
      "cmd.input, cmd.classes, cmd.n_samples, cmd.class_a, cmd.class_b, cmd.steps, cmd.sweep");

  struct SubState {
    CLI::App* sub;
    CommonArgs args;
  };
  std::map<std::string, std::shared_ptr<SubState>> subs;
  for (const std::string name :
       {"pretrain", "train", "translate", "interpolate", "evaluate", "ablate"}) {
    auto state = std::make_shared<SubState>();
    state->sub = app.add_subcommand(name);
    add_common(state->sub, state->args);
    subs[name] = state;
  }
  // command-specific sugar
  {
    auto& t = subs["translate"];
    t->sub->add_option_function<std::string>(
        "--input", [s = t](const std::string& v) { s->args.overrides.set("cmd.input", v); },
        "input image file or directory");
    t->sub->add_option_function<std::string>(
        "--classes", [s = t](const std::string& v) { s->args.overrides.set("cmd.classes", v); },
        "comma-separated class names or 'all'");
    t->sub->add_option_function<std::string>(
        "--n-samples", [s = t](const std::string& v) { s->args.overrides.set("cmd.n_samples", v); },
        "noise samples per (input, class)");
  }
  {
    auto& t = subs["interpolate"];
    t->sub->add_option_function<std::string>(
        "--input", [s = t](const std::string& v) { s->args.overrides.set("cmd.input", v); },
        "input image file");
    t->sub->add_option_function<std::string>(
        "--class-a", [s = t](const std::string& v) { s->args.overrides.set("cmd.class_a", v); },
        "start class name");
    t->sub->add_option_function<std::string>(
        "--class-b", [s = t](const std::string& v) { s->args.overrides.set("cmd.class_b", v); },
        "end class name");
    t->sub->add_option_function<std::string>(
        "--steps", [s = t](const std::string& v) { s->args.overrides.set("cmd.steps", v); },
        "interpolation steps (>= 2)");
  }
  {
    auto& t = subs["ablate"];
    t->sub->add_option_function<std::string>(
        "--sweep", [s = t](const std::string& v) { s->args.overrides.set("cmd.sweep", v); },
        "adaptors|transfer|depth|rec|data|baseline");
  }

  std::vector<const char*> argv;
  argv.push_back("deepi2i");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    for (auto& [name, state] : subs) {
      if (!state->sub->parsed()) continue;
      RunConfig cfg = build_config(state->args, name);
      if (name == "pretrain") {
        std::cout << "checkpoint: " << cmd_pretrain(cfg).string() << "\n";
      } else if (name == "train") {
        std::cout << "checkpoint: " << cmd_train(cfg).string() << "\n";
      } else if (name == "translate") {
        for (const auto& f : cmd_translate(cfg)) std::cout << f.string() << "\n";
      } else if (name == "interpolate") {
        for (const auto& f : cmd_interpolate(cfg)) std::cout << f.string() << "\n";
      } else if (name == "evaluate") {
        MetricReport r = cmd_evaluate(cfg);
        std::cout << "mFID=" << r.mfid << " mKIDx100=" << r.mkid * 100.0;
        if (r.rc >= 0) std::cout << " RC=" << r.rc << " FC=" << r.fc;
        std::cout << "\n";
      } else if (name == "ablate") {
        std::cout << "summary: " << cmd_ablate(cfg).string() << "\n";
      }
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace deepi2i::cli
