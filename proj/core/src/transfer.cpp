#include "deepi2i/transfer.h"

#include <algorithm>
#include <sstream>

namespace deepi2i {

TransferFlags TransferFlags::parse(const std::string& spec) {
  TransferFlags f = TransferFlags::none();
  std::istringstream is(spec);
  std::string token;
  while (std::getline(is, token, ',')) {
    if (token.empty()) continue;
    if (token == "enc" || token == "encoder")
      f.encoder = true;
    else if (token == "gen" || token == "generator")
      f.generator = true;
    else if (token == "dis" || token == "discriminator")
      f.discriminator = true;
    else if (token == "none")
      return TransferFlags::none();
    else if (token == "all")
      return TransferFlags::all();
    else
      throw ConfigError("unknown transfer flag '" + token + "' (enc,gen,dis|all|none)");
  }
  return f;
}

std::string TransferFlags::to_string() const {
  std::string s;
  if (encoder) s += "enc";
  if (generator) s += std::string(s.empty() ? "" : ",") + "gen";
  if (discriminator) s += std::string(s.empty() ? "" : ",") + "dis";
  return s.empty() ? "none" : s;
}

int64_t TransferMap::mapped_count(const std::string& target_network) const {
  return std::count_if(entries.begin(), entries.end(), [&](const TransferEntry& e) {
    return e.target_network == target_network;
  });
}

namespace {

bool is_class_embedding(const std::string& role, const std::string& name) {
  if (role == "discriminator") return name == "head.embed.weight";
  if (role == "generator") return name == "embed.weight";
  return false;
}

}  // namespace

TransferMap build_transfer_map(const Checkpoint& pretrained, const ArchConfig& target_cfg,
                               const TransferFlags& flags) {
  target_cfg.validate();
  if (!pretrained.has_network("generator") || !pretrained.has_network("discriminator"))
    throw CheckpointError("pretrained checkpoint must contain a generator and a discriminator");
  if (!pretrained.arch.compatible_backbone(target_cfg))
    throw CheckpointError(
        "incompatible pretrained checkpoint: resolution/width/tap structure differs");

  const bool class_match = pretrained.arch.num_classes == target_cfg.num_classes;
  const std::string class_reason = "class embedding skipped: source has " +
                                   std::to_string(pretrained.arch.num_classes) +
                                   " classes, target has " +
                                   std::to_string(target_cfg.num_classes);

  ArchPlan target_plan = make_plan(target_cfg);
  TransferMap map;
  map.flags = flags;

  auto map_network = [&](const std::string& source_net, const std::string& target_net) {
    const NamedArrays& src = pretrained.networks.at(source_net);
    const auto target_shapes = plan_param_shapes(target_plan, target_net);
    auto target_shape_of = [&](const std::string& name) -> const NamedShape* {
      for (const auto& s : target_shapes)
        if (s.name == name) return &s;
      return nullptr;
    };
    for (const auto& [name, tensor] : src.arrays) {
      const NamedShape* target = target_shape_of(name);
      if (target == nullptr) {
        map.skipped.push_back({source_net, name, target_net,
                               "no counterpart in " + target_net +
                                   (target_net == "encoder" ? " (projection head removed)" : "")});
        continue;
      }
      if (is_class_embedding(target_net, name) && !class_match) {
        map.skipped.push_back({source_net, name, target_net, class_reason});
        continue;
      }
      if (target->shape != tensor.shape())
        throw CheckpointError("transfer shape clash for '" + name + "': source " +
                              shape_str(tensor.shape()) + " vs target " +
                              shape_str(target->shape));
      map.entries.push_back({source_net, name, target_net, name, tensor.shape()});
    }
  };

  if (flags.encoder) map_network("discriminator", "encoder");
  if (flags.discriminator) map_network("discriminator", "discriminator");
  if (flags.generator) map_network("generator", "generator");

  if (map.entries.empty() && (flags.encoder || flags.generator || flags.discriminator))
    throw CheckpointError("transfer map is empty although transfer was requested");
  return map;
}

void apply_transfer(const TransferMap& map, const Checkpoint& pretrained, Networks<float>& nets) {
  for (const auto& e : map.entries) {
    const NamedArrays& src = pretrained.networks.at(e.source_network);
    const Tensor<float>* value = src.find(e.source_name);
    if (value == nullptr)
      throw CheckpointError("transfer map references missing source '" + e.source_name + "'");
    bool applied = false;
    nets.visit(e.target_network, [&](const nn::ParamRef<float>& p) {
      if (p.name != e.target_name) return;
      if (!p.value->same_shape(*value))
        throw CheckpointError("transfer map corrupted: shape clash at '" + e.target_name + "'");
      *p.value = *value;
      applied = true;
    });
    if (!applied)
      throw CheckpointError("transfer target '" + e.target_name + "' not found in " +
                            e.target_network);
  }
}

bool FreezePolicy::is_trainable(const std::string& role) const {
  return std::find(trainable.begin(), trainable.end(), role) != trainable.end();
}

FreezePolicy freeze_policy(int phase) {
  if (phase == 1) return {1, {"adaptors", "discriminator"}};
  if (phase == 2) return {2, {"adaptors", "generator", "discriminator"}};
  throw ConfigError("freeze policy: phase must be 1 or 2, got " + std::to_string(phase));
}

}  // namespace deepi2i
