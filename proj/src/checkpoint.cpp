#include "swum/checkpoint.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include "swum/ntf.hpp"

namespace swum {

using nlohmann::json;

namespace {

constexpr std::string_view kSeparator{"\0NTFPACK\0", 9};
constexpr const char* kFormat = "swum-checkpoint-1";

}  // namespace

void Checkpoint::put(const std::string& name, Tensor t, bool pretrained_designated) {
  tensors[name] = std::move(t);
  designated[name] = pretrained_designated;
}

std::vector<std::string> Checkpoint::designated_names() const {
  std::vector<std::string> out;
  for (const auto& [name, d] : designated)
    if (d) out.push_back(name);
  return out;
}

std::string serialize(const Checkpoint& ck) {
  json manifest;
  manifest["format"] = kFormat;
  if (ck.config) manifest["config"] = *ck.config;
  json entries = json::object();
  std::string payload;
  for (const auto& [name, t] : ck.tensors) {
    const std::string rec = ntf::encode(t);
    auto it = ck.designated.find(name);
    entries[name] = {{"shape", t.shape()},
                     {"dtype", std::string(dtype_name(t.dtype()))},
                     {"offset", payload.size()},
                     {"nbytes", rec.size()},
                     {"pretrained_designated", it != ck.designated.end() && it->second}};
    payload += rec;
  }
  manifest["tensors"] = std::move(entries);
  std::string out = manifest.dump(1);
  out += kSeparator;
  out += payload;
  return out;
}

Checkpoint deserialize(std::string_view bytes) {
  const auto sep = bytes.find(kSeparator);
  if (sep == std::string_view::npos) throw IntegrityError("checkpoint has no NTFPACK separator");
  json manifest;
  try {
    manifest = json::parse(bytes.substr(0, sep));
  } catch (const json::exception& e) {
    throw IntegrityError(std::string("checkpoint manifest is not valid JSON: ") + e.what());
  }
  if (manifest.value("format", "") != kFormat) throw IntegrityError("checkpoint format tag missing or unknown");
  const std::string_view payload = bytes.substr(sep + kSeparator.size());
  Checkpoint ck;
  if (manifest.contains("config")) ck.config = manifest["config"];
  try {
    for (const auto& [name, e] : manifest.at("tensors").items()) {
      std::size_t pos = e.at("offset").get<std::size_t>();
      const std::size_t nbytes = e.at("nbytes").get<std::size_t>();
      if (pos + nbytes > payload.size())
        throw IntegrityError("checkpoint payload truncated at tensor " + name + ": need " +
                             std::to_string(pos + nbytes) + " bytes, have " + std::to_string(payload.size()));
      const std::size_t start = pos;
      Tensor t = ntf::decode(payload.substr(0, start + nbytes), pos);
      if (pos != start + nbytes) throw IntegrityError("tensor " + name + " record length disagrees with manifest");
      if (t.shape() != e.at("shape").get<Shape>() || dtype_name(t.dtype()) != e.at("dtype").get<std::string>())
        throw IntegrityError("tensor " + name + " header disagrees with manifest");
      ck.put(name, std::move(t), e.at("pretrained_designated").get<bool>());
    }
  } catch (const json::exception& e) {
    throw IntegrityError(std::string("checkpoint manifest malformed: ") + e.what());
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const std::string bytes = serialize(ck);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

Checkpoint checkpoint_of(const Network& net) {
  Checkpoint ck;
  ck.config = net.config().to_json();
  for (const auto& [name, t] : net.params().items()) ck.put(name, t.detach(), is_pretrained_designated(name));
  return ck;
}

void load_into(Network& net, const Checkpoint& ck) {
  std::vector<std::string> problems;
  for (const auto& [name, t] : net.params().items()) {
    auto it = ck.tensors.find(name);
    if (it == ck.tensors.end())
      problems.push_back("missing " + name);
    else if (it->second.shape() != t.shape())
      problems.push_back("shape mismatch " + name + ": checkpoint " + shape_str(it->second.shape()) + " vs network " +
                         shape_str(t.shape()));
  }
  for (const auto& [name, t] : ck.tensors)
    if (!net.params().contains(name)) problems.push_back("unexpected " + name);
  if (!problems.empty()) {
    std::string msg = "checkpoint does not match network (" + std::to_string(problems.size()) + " problems):";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
  for (const auto& [name, t] : net.params().items()) {
    Tensor dst = t;
    dst.copy_from(ck.tensors.at(name).to(t.dtype()));
  }
}

Network network_from_checkpoint(const Checkpoint& ck) {
  if (!ck.config) throw ConfigError("checkpoint carries no model config");
  Network net(ModelConfig::from_json(*ck.config), 0, DType::f32, false);
  load_into(net, ck);
  return net;
}

InitReport selective_init(Network& net, const Checkpoint& ck) {
  std::vector<std::string> problems;
  for (const auto& [name, d] : ck.designated) {
    if (!d || !net.params().contains(name)) continue;
    const Tensor& have = ck.tensors.at(name);
    const Tensor& want = net.params().get(name);
    if (have.shape() != want.shape())
      problems.push_back(name + ": checkpoint " + shape_str(have.shape()) + " vs network " + shape_str(want.shape()));
  }
  if (!problems.empty()) {
    std::string msg = "designated tensors do not fit the network:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
  InitReport rep;
  for (const auto& [name, t] : net.params().items()) {
    auto it = ck.designated.find(name);
    if (it != ck.designated.end() && it->second) {
      Tensor dst = t;
      dst.copy_from(ck.tensors.at(name).to(t.dtype()));
      rep.initialized.push_back(name);
    } else {
      rep.skipped.push_back(name);
    }
  }
  return rep;
}

Checkpoint make_surrogate_pretrained(const ModelConfig& cfg, std::uint64_t seed) {
  const Network donor(cfg, child_seed(seed, "surrogate-pretrained"));
  Checkpoint ck;
  ck.config = cfg.to_json();
  for (const auto& [name, t] : donor.params().items())
    if (is_pretrained_designated(name)) ck.put(name, t.detach(), true);
  return ck;
}

}  // namespace swum
