#include "deepi2i/runconfig.h"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace deepi2i {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ','))
    if (!trim(tok).empty()) out.push_back(std::stoi(trim(tok)));
  return out;
}

std::string join_int_list(const std::vector<int>& v) {
  std::string s;
  for (int x : v) s += (s.empty() ? "" : ",") + std::to_string(x);
  return s;
}

}  // namespace

KvConfig KvConfig::parse_string(const std::string& text) {
  KvConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + " is not key=value: " + t);
    cfg.kv_[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return cfg;
}

KvConfig KvConfig::parse_file(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw ConfigError("cannot open config file '" + file.string() + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_string(ss.str());
}

const std::string& KvConfig::require(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) throw ConfigError("missing required config key '" + key + "'");
  return it->second;
}

std::string KvConfig::get_or(const std::string& key, const std::string& dflt) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? dflt : it->second;
}

int64_t KvConfig::get_int(const std::string& key, int64_t dflt) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? dflt : std::stoll(it->second);
}

double KvConfig::get_double(const std::string& key, double dflt) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? dflt : std::stod(it->second);
}

uint64_t KvConfig::get_u64(const std::string& key, uint64_t dflt) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? dflt : std::stoull(it->second);
}

bool KvConfig::get_bool(const std::string& key, bool dflt) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return dflt;
  return it->second == "1" || it->second == "true" || it->second == "yes";
}

void KvConfig::merge(const KvConfig& overrides) {
  for (const auto& [k, v] : overrides.kv_) kv_[k] = v;
}

std::string KvConfig::serialize() const {
  std::ostringstream os;
  for (const auto& [k, v] : kv_) os << k << "=" << v << "\n";
  return os.str();
}

// ---- RunConfig ----

RunConfig RunConfig::from_kv(const KvConfig& kv) {
  RunConfig c;
  c.command = kv.get_or("command", "");
  c.seed = kv.get_u64("seed", c.seed);
  c.out = kv.get_or("out", c.out);

  c.dataset = kv.get_or("data.dataset", "");
  c.data_fraction = kv.get_double("data.fraction", c.data_fraction);
  c.data_fraction_seed = kv.get_u64("data.fraction_seed", c.data_fraction_seed);
  c.split_seed = kv.get_u64("data.split_seed", c.split_seed);
  c.materialize_dir = kv.get_or("data.materialize", "");

  std::map<std::string, std::string> plain(kv.entries().begin(), kv.entries().end());
  c.arch = ArchConfig::from_kv(plain);

  TrainConfig& t = c.train;
  t.total_iterations = kv.get_int("train.iterations", t.total_iterations);
  t.phase1_iterations = kv.get_int("train.phase1", t.phase1_iterations);
  t.batch_size = kv.get_int("train.batch", t.batch_size);
  t.lr_generator = kv.get_double("train.lr_generator", t.lr_generator);
  t.lr_other = kv.get_double("train.lr_other", t.lr_other);
  t.beta1 = kv.get_double("train.beta1", t.beta1);
  t.beta2 = kv.get_double("train.beta2", t.beta2);
  t.d_steps_per_g_step = static_cast<int>(kv.get_int("train.d_steps", t.d_steps_per_g_step));
  t.ema_decay = kv.get_double("train.ema", t.ema_decay);
  t.ema_ramp = kv.get_bool("train.ema_ramp", t.ema_ramp);
  t.seed = c.seed;
  t.checkpoint_every = kv.get_int("train.checkpoint_every", t.checkpoint_every);
  t.log_every = kv.get_int("train.log_every", t.log_every);
  t.eval_every = kv.get_int("train.eval_every", t.eval_every);
  t.eval_n_gen_per_class = kv.get_int("train.eval_n_gen", t.eval_n_gen_per_class);
  t.eval_seed = kv.get_u64("train.eval_seed", t.eval_seed);
  t.grad_clip = kv.get_double("train.grad_clip", t.grad_clip);
  t.augment = kv.get_bool("data.augment", t.augment);

  LossConfig& l = t.loss;
  l.lambda_adv = kv.get_double("loss.lambda_adv", l.lambda_adv);
  l.lambda_rec = kv.get_double("loss.lambda_rec", l.lambda_rec);
  l.adv_kind = c.arch.adv_loss_kind;
  l.rec_sum_mode = kv.get_or("loss.rec_mode", "mean") == "sum";
  l.orthogonal_reg_strength = kv.get_double("loss.orth_strength", l.orthogonal_reg_strength);
  for (const auto& [k, v] : kv.entries()) {
    const std::string pre = "loss.alpha.";
    if (k.rfind(pre, 0) == 0) l.alpha_override[std::stoi(k.substr(pre.size()))] = std::stod(v);
  }

  const std::string mode = kv.get_or("adaptors.mode", "learned");
  if (mode == "learned")
    c.adaptor_mode = AdaptorMode::kLearned;
  else if (mode == "duplicate")
    c.adaptor_mode = AdaptorMode::kChannelDuplicate;
  else
    throw ConfigError("unknown adaptors.mode '" + mode + "' (learned|duplicate)");
  c.adaptor_levels = parse_int_list(kv.get_or("adaptors.levels", ""));

  c.pretrained_path = kv.get_or("pretrained", "");
  c.transfer_flags = TransferFlags::parse(kv.get_or("transfer.flags", "all"));
  c.scratch = kv.get_bool("scratch", false);

  c.checkpoint_path = kv.get_or("checkpoint", "");
  c.n_gen_per_class = kv.get_int("metrics.n_gen_per_class", c.n_gen_per_class);
  c.rcfc = kv.get_bool("metrics.rcfc", c.rcfc);
  c.use_ema = kv.get_bool("metrics.use_ema", c.use_ema);
  c.extractor_width = kv.get_int("metrics.extractor_width", c.extractor_width);
  c.extractor_dim = kv.get_int("metrics.extractor_dim", c.extractor_dim);
  c.extractor_seed = kv.get_u64("metrics.extractor_seed", c.extractor_seed);
  c.classifier.width = kv.get_int("metrics.classifier_width", c.classifier.width);
  c.classifier.iterations = kv.get_int("metrics.classifier_iters", c.classifier.iterations);
  c.classifier.batch = kv.get_int("metrics.classifier_batch", c.classifier.batch);
  c.classifier.lr = kv.get_double("metrics.classifier_lr", c.classifier.lr);
  c.classifier.seed = kv.get_u64("metrics.classifier_seed", c.classifier.seed);

  c.input_path = kv.get_or("cmd.input", "");
  c.classes = kv.get_or("cmd.classes", c.classes);
  c.n_samples = kv.get_int("cmd.n_samples", c.n_samples);
  c.class_a = kv.get_or("cmd.class_a", "");
  c.class_b = kv.get_or("cmd.class_b", "");
  c.steps = kv.get_int("cmd.steps", c.steps);
  c.sweep = kv.get_or("cmd.sweep", c.sweep);
  return c;
}

KvConfig RunConfig::to_kv() const {
  KvConfig kv;
  kv.set("command", command);
  kv.set("seed", std::to_string(seed));
  kv.set("out", out);
  kv.set("data.dataset", dataset);
  kv.set("data.fraction", fmt_double(data_fraction));
  kv.set("data.fraction_seed", std::to_string(data_fraction_seed));
  kv.set("data.split_seed", std::to_string(split_seed));
  if (!materialize_dir.empty()) kv.set("data.materialize", materialize_dir);
  kv.set("data.augment", train.augment ? "1" : "0");

  for (const auto& [k, v] : arch.to_kv()) kv.set(k, v);

  kv.set("train.iterations", std::to_string(train.total_iterations));
  kv.set("train.phase1", std::to_string(train.phase1_iterations));
  kv.set("train.batch", std::to_string(train.batch_size));
  kv.set("train.lr_generator", fmt_double(train.lr_generator));
  kv.set("train.lr_other", fmt_double(train.lr_other));
  kv.set("train.beta1", fmt_double(train.beta1));
  kv.set("train.beta2", fmt_double(train.beta2));
  kv.set("train.d_steps", std::to_string(train.d_steps_per_g_step));
  kv.set("train.ema", fmt_double(train.ema_decay));
  kv.set("train.ema_ramp", train.ema_ramp ? "1" : "0");
  kv.set("train.checkpoint_every", std::to_string(train.checkpoint_every));
  kv.set("train.log_every", std::to_string(train.log_every));
  kv.set("train.eval_every", std::to_string(train.eval_every));
  kv.set("train.eval_n_gen", std::to_string(train.eval_n_gen_per_class));
  kv.set("train.eval_seed", std::to_string(train.eval_seed));
  kv.set("train.grad_clip", fmt_double(train.grad_clip));

  kv.set("loss.lambda_adv", fmt_double(train.loss.lambda_adv));
  kv.set("loss.lambda_rec", fmt_double(train.loss.lambda_rec));
  kv.set("loss.rec_mode", train.loss.rec_sum_mode ? "sum" : "mean");
  kv.set("loss.orth_strength", fmt_double(train.loss.orthogonal_reg_strength));
  for (const auto& [level, a] : train.loss.alpha_override)
    kv.set("loss.alpha." + std::to_string(level), fmt_double(a));

  kv.set("adaptors.mode", adaptor_mode == AdaptorMode::kLearned ? "learned" : "duplicate");
  if (!adaptor_levels.empty()) kv.set("adaptors.levels", join_int_list(adaptor_levels));

  if (!pretrained_path.empty()) kv.set("pretrained", pretrained_path);
  kv.set("transfer.flags", transfer_flags.to_string());
  kv.set("scratch", scratch ? "1" : "0");

  if (!checkpoint_path.empty()) kv.set("checkpoint", checkpoint_path);
  kv.set("metrics.n_gen_per_class", std::to_string(n_gen_per_class));
  kv.set("metrics.rcfc", rcfc ? "1" : "0");
  kv.set("metrics.use_ema", use_ema ? "1" : "0");
  kv.set("metrics.extractor_width", std::to_string(extractor_width));
  kv.set("metrics.extractor_dim", std::to_string(extractor_dim));
  kv.set("metrics.extractor_seed", std::to_string(extractor_seed));
  kv.set("metrics.classifier_width", std::to_string(classifier.width));
  kv.set("metrics.classifier_iters", std::to_string(classifier.iterations));
  kv.set("metrics.classifier_batch", std::to_string(classifier.batch));
  kv.set("metrics.classifier_lr", fmt_double(classifier.lr));
  kv.set("metrics.classifier_seed", std::to_string(classifier.seed));

  if (!input_path.empty()) kv.set("cmd.input", input_path);
  kv.set("cmd.classes", classes);
  kv.set("cmd.n_samples", std::to_string(n_samples));
  if (!class_a.empty()) kv.set("cmd.class_a", class_a);
  if (!class_b.empty()) kv.set("cmd.class_b", class_b);
  kv.set("cmd.steps", std::to_string(steps));
  kv.set("cmd.sweep", sweep);
  return kv;
}

std::filesystem::path RunConfig::write_echo() const {
  std::filesystem::create_directories(out);
  const auto path = std::filesystem::path(out) / "config_echo.cfg";
  std::ofstream os(path, std::ios::trunc);
  os << to_kv().serialize();
  return path;
}

DatasetHandle RunConfig::open_dataset() const {
  if (dataset.empty()) throw ConfigError("no dataset configured (data.dataset / --dataset)");
  DatasetHandle d = DatasetHandle::open(dataset, arch.resolution, split_seed);
  if (!materialize_dir.empty()) d.materialize(materialize_dir);
  if (data_fraction < 1.0) d = d.subsample(data_fraction, data_fraction_seed);
  return d;
}

BuildOptions RunConfig::build_options() const {
  BuildOptions opts;
  opts.with_encoder = true;
  opts.adaptor_mode = adaptor_mode;
  opts.active_adaptor_levels = adaptor_levels;
  return opts;
}

ConvEmbedder RunConfig::make_embedder() const {
  return ConvEmbedder(arch.resolution, extractor_width, extractor_dim, extractor_seed);
}

}  // namespace deepi2i
