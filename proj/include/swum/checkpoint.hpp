#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "swum/model.hpp"

namespace swum {

/// Named tensors plus the designated-for-pretraining flag of each entry.
///
/// On disk: a UTF-8 JSON manifest, the 9-byte separator "\0NTFPACK\0", then
/// the NTF records back to back. Manifest offsets are relative to the first
/// byte after the separator.
struct Checkpoint {
  std::optional<nlohmann::json> config;
  std::map<std::string, Tensor> tensors;
  std::map<std::string, bool> designated;

  void put(const std::string& name, Tensor t, bool pretrained_designated);
  std::vector<std::string> designated_names() const;
};

std::string serialize(const Checkpoint& ck);
Checkpoint deserialize(std::string_view bytes);  // IntegrityError on damage
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Snapshot of every network parameter, flagged by is_pretrained_designated.
Checkpoint checkpoint_of(const Network& net);

/// Full load. Throws ConfigError listing every missing, unexpected and
/// mis-shaped tensor when the checkpoint does not fit the network exactly.
void load_into(Network& net, const Checkpoint& ck);

/// Rebuilds the network recorded in the checkpoint config and loads it.
Network network_from_checkpoint(const Checkpoint& ck);

struct InitReport {
  std::vector<std::string> initialized;
  std::vector<std::string> skipped;  // network parameters left untouched
};

/// Copies designated checkpoint tensors into same-named network parameters.
/// A designated tensor whose shape differs is a hard ConfigError; designated
/// names unknown to the network are skipped.
InitReport selective_init(Network& net, const Checkpoint& ck);

/// Stand-in for an externally pretrained encoder: exactly the designated
/// tensors of `cfg`, drawn from the initial distribution under a seed
/// distinct from any scratch build.
Checkpoint make_surrogate_pretrained(const ModelConfig& cfg, std::uint64_t seed);

}  // namespace swum
