#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "swum/layers.hpp"

namespace swum {

enum class Variant { umamba, dagger };
std::string_view variant_name(Variant v);  // "umamba" / "umamba_dagger"
Variant variant_from_name(std::string_view s);

struct ModelConfig {
  Variant variant = Variant::umamba;
  std::vector<std::int64_t> stage_dims{48, 96, 192, 384, 768};
  std::vector<std::int64_t> vss_depths{2, 2, 9, 2};  // stages 2..S
  std::int64_t d_state = 16;
  std::int64_t num_classes = 2;
  std::int64_t input_channels = 1;
  std::int64_t input_h = 320;
  std::int64_t input_w = 320;
  bool deep_supervision = true;
  std::int64_t decoder_vss_depth = 2;  // dagger only

  int num_stages() const { return static_cast<int>(stage_dims.size()); }
  /// Input extents must be multiples of this (2^stages).
  std::int64_t divisor() const { return std::int64_t{1} << num_stages(); }
  void validate() const;                                  // ConfigError
  void check_input(std::int64_t h, std::int64_t w) const;  // DimensionError

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  static ModelConfig load(const std::filesystem::path& path);

  /// Named presets: "abdomen_mri", "endoscopy", "microscopy", "tiny".
  static ModelConfig preset(std::string_view name, Variant v);
};

/// Downsampling factor of each returned head, final output first.
std::vector<int> head_strides(const ModelConfig& cfg);

/// Module key used for grouping: the first two dotted components.
std::string module_of(std::string_view param_name);

/// Encoder VSS blocks and patch merges; never the stem or patch embedding.
bool is_pretrained_designated(std::string_view param_name);

class Network {
 public:
  /// Deterministic in (cfg, seed). random_init = false leaves every tensor
  /// zero, which is enough for counting.
  Network(ModelConfig cfg, std::uint64_t seed, DType dtype = DType::f32, bool random_init = true);

  const ModelConfig& config() const { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  DType dtype() const { return dtype_; }

  /// Logits per head, ordered as head_strides(): [B,K,H/s,W/s].
  std::vector<Tensor> forward(const Tensor& x, ssm::ScanAlgorithm algo = ssm::ScanAlgorithm::sequential) const;

  /// Encoder features z'_1..z'_S as NCHW (dagger has no z'_1; entry 0 is
  /// undefined there).
  std::vector<Tensor> encode(const Tensor& x, ssm::ScanAlgorithm algo = ssm::ScanAlgorithm::sequential) const;

  Network clone() const;  // deep copy of every parameter

 private:
  Network() = default;
  std::vector<Tensor> forward_umamba(const Tensor& x, ssm::ScanAlgorithm algo) const;
  std::vector<Tensor> forward_dagger(const Tensor& x, ssm::ScanAlgorithm algo) const;
  std::vector<Tensor> encode_nhwc(const Tensor& x, ssm::ScanAlgorithm algo) const;

  ModelConfig cfg_;
  DType dtype_ = DType::f32;
  ParamSet params_;
};

}  // namespace swum
