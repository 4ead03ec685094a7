#include "deepi2i/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace deepi2i {

const Tensor<float>* NamedArrays::find(const std::string& name) const {
  for (const auto& [n, t] : arrays)
    if (n == name) return &t;
  return nullptr;
}

Tensor<float>* NamedArrays::find(const std::string& name) {
  for (auto& [n, t] : arrays)
    if (n == name) return &t;
  return nullptr;
}

namespace {

constexpr char kMagic[8] = {'D', 'I', '2', 'I', 'C', 'K', 'P', 'T'};

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw CheckpointError("truncated checkpoint file");
  return v;
}

void write_string(std::ostream& os, const std::string& s) {
  write_pod<uint32_t>(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is, uint32_t max_len = 1u << 20) {
  const uint32_t len = read_pod<uint32_t>(is);
  if (len > max_len) throw CheckpointError("corrupt checkpoint: string too long");
  std::string s(len, '\0');
  is.read(s.data(), len);
  if (!is) throw CheckpointError("truncated checkpoint file");
  return s;
}

std::string build_manifest(const Checkpoint& c) {
  std::ostringstream os;
  os << "format.version=" << c.version << "\n";
  os << "iteration=" << c.iteration << "\n";
  for (const auto& [k, v] : c.arch.to_kv()) os << k << "=" << v << "\n";
  os << "adaptors.mode=" << c.adaptor_mode << "\n";
  {
    std::string levels;
    for (int l : c.adaptor_levels) levels += (levels.empty() ? "" : ",") + std::to_string(l);
    os << "adaptors.levels=" << levels << "\n";
  }
  os << "vocab.size=" << c.vocab.size() << "\n";
  for (int64_t i = 0; i < c.vocab.size(); ++i) os << "vocab." << i << "=" << c.vocab.name(i) << "\n";
  os << "rng.state=" << c.rng_state << "\n";
  return os.str();
}

std::map<std::string, std::string> parse_manifest(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CheckpointError("corrupt manifest line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("cannot open '" + file.string() + "' for writing");

  os.write(kMagic, sizeof(kMagic));
  write_pod<uint32_t>(os, ckpt.version);
  write_string(os, build_manifest(ckpt));

  write_pod<uint32_t>(os, static_cast<uint32_t>(ckpt.networks.size()));
  for (const auto& [role, net] : ckpt.networks) {
    write_string(os, role);
    write_pod<uint32_t>(os, static_cast<uint32_t>(net.arrays.size()));
    for (const auto& [name, tensor] : net.arrays) {
      write_string(os, name);
      write_pod<uint32_t>(os, static_cast<uint32_t>(tensor.shape().size()));
      for (int64_t d : tensor.shape()) write_pod<uint64_t>(os, static_cast<uint64_t>(d));
      const uint64_t bytes = static_cast<uint64_t>(tensor.numel()) * sizeof(float);
      write_pod<uint64_t>(os, bytes);
      os.write(reinterpret_cast<const char*>(tensor.data()),
               static_cast<std::streamsize>(bytes));
    }
  }
  if (!os) throw CheckpointError("write failed for '" + file.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint '" + file.string() + "'");

  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError("'" + file.string() + "' is not a checkpoint file");

  Checkpoint c;
  c.version = read_pod<uint32_t>(is);
  if (c.version != Checkpoint::kVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(c.version));

  const auto kv = parse_manifest(read_string(is, 1u << 26));
  c.arch = ArchConfig::from_kv(kv);
  if (auto it = kv.find("iteration"); it != kv.end()) c.iteration = std::stoll(it->second);
  if (auto it = kv.find("rng.state"); it != kv.end()) c.rng_state = it->second;
  if (auto it = kv.find("adaptors.mode"); it != kv.end()) c.adaptor_mode = it->second;
  if (auto it = kv.find("adaptors.levels"); it != kv.end() && !it->second.empty()) {
    std::istringstream ls(it->second);
    std::string tok;
    while (std::getline(ls, tok, ',')) c.adaptor_levels.push_back(std::stoi(tok));
  }
  int64_t vocab_size = 0;
  if (auto it = kv.find("vocab.size"); it != kv.end()) vocab_size = std::stoll(it->second);
  std::vector<std::string> names;
  for (int64_t i = 0; i < vocab_size; ++i) {
    auto it = kv.find("vocab." + std::to_string(i));
    if (it == kv.end()) throw CheckpointError("manifest missing vocab entry " + std::to_string(i));
    names.push_back(it->second);
  }
  c.vocab = ClassVocabulary(std::move(names));
  if (c.vocab.size() != c.arch.num_classes)
    throw CheckpointError("manifest vocabulary size disagrees with arch.num_classes");

  const uint32_t n_networks = read_pod<uint32_t>(is);
  if (n_networks > 16) throw CheckpointError("corrupt checkpoint: network count");
  for (uint32_t i = 0; i < n_networks; ++i) {
    const std::string role = read_string(is);
    NamedArrays net;
    const uint32_t n_arrays = read_pod<uint32_t>(is);
    if (n_arrays > 1u << 20) throw CheckpointError("corrupt checkpoint: array count");
    for (uint32_t a = 0; a < n_arrays; ++a) {
      const std::string name = read_string(is);
      const uint32_t ndim = read_pod<uint32_t>(is);
      if (ndim > 8) throw CheckpointError("corrupt checkpoint: rank of '" + name + "'");
      Shape shape;
      for (uint32_t d = 0; d < ndim; ++d)
        shape.push_back(static_cast<int64_t>(read_pod<uint64_t>(is)));
      const uint64_t bytes = read_pod<uint64_t>(is);
      Tensor<float> t(shape);
      if (bytes != static_cast<uint64_t>(t.numel()) * sizeof(float))
        throw CheckpointError("shape/payload mismatch for array '" + name + "'");
      is.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(bytes));
      if (!is) throw CheckpointError("truncated checkpoint in array '" + name + "'");
      net.arrays.emplace_back(name, std::move(t));
    }
    c.networks.emplace(role, std::move(net));
  }
  // verify stored shapes against the stored architecture
  ArchPlan plan = make_plan(c.arch);
  for (const auto& [role, net] : c.networks) {
    if (role == "generator_ema" || role == "adaptors") continue;  // adaptors may be variant-sized
    const auto expected = plan_param_shapes(plan, role);
    if (expected.size() != net.arrays.size())
      throw CheckpointError("network '" + role + "' array count disagrees with architecture");
    for (size_t i = 0; i < expected.size(); ++i) {
      if (expected[i].name != net.arrays[i].first ||
          expected[i].shape != net.arrays[i].second.shape())
        throw CheckpointError("network '" + role + "' array '" + net.arrays[i].first +
                              "' disagrees with architecture");
    }
  }
  return c;
}

BuildOptions Checkpoint::build_options() const {
  BuildOptions opts;
  opts.with_encoder = adaptor_mode != "none";
  opts.adaptor_mode =
      adaptor_mode == "duplicate" ? AdaptorMode::kChannelDuplicate : AdaptorMode::kLearned;
  opts.active_adaptor_levels = adaptor_levels;
  return opts;
}

Checkpoint snapshot_networks(Networks<float>& nets, const ClassVocabulary& vocab,
                             int64_t iteration, const std::string& rng_state,
                             const NamedArrays* generator_ema) {
  Checkpoint c;
  c.arch = nets.plan.cfg;
  c.vocab = vocab;
  c.iteration = iteration;
  c.rng_state = rng_state;
  if (nets.adaptors) {
    c.adaptor_mode =
        nets.adaptors->mode() == AdaptorMode::kChannelDuplicate ? "duplicate" : "learned";
    c.adaptor_levels = nets.adaptors->active_levels();
  }
  for (const auto& role : nets.roles()) {
    NamedArrays arrays;
    nets.visit(role, [&](const nn::ParamRef<float>& p) {
      arrays.arrays.emplace_back(p.name, *p.value);
    });
    c.networks.emplace(role, std::move(arrays));
  }
  if (generator_ema != nullptr) c.networks.emplace("generator_ema", *generator_ema);
  return c;
}

void restore_networks(const Checkpoint& ckpt, Networks<float>& nets) {
  for (const auto& role : nets.roles()) {
    auto it = ckpt.networks.find(role);
    if (it == ckpt.networks.end())
      throw CheckpointError("checkpoint has no '" + role + "' network");
    const NamedArrays& src = it->second;
    size_t count = 0;
    nets.visit(role, [&](const nn::ParamRef<float>& p) {
      const Tensor<float>* stored = src.find(p.name);
      if (stored == nullptr)
        throw CheckpointError("checkpoint missing array '" + p.name + "' for " + role);
      if (!stored->same_shape(*p.value))
        throw CheckpointError("shape mismatch restoring '" + p.name + "'");
      *p.value = *stored;
      ++count;
    });
    if (count != src.arrays.size())
      throw CheckpointError("checkpoint for '" + role + "' carries extra arrays");
  }
}

}  // namespace deepi2i
