#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "swum/ops.hpp"
#include "swum/ssm.hpp"

namespace swum {

/// Named parameters in creation order. Names are dotted paths such as
/// "encoder.stage3.block2.ssm.A_log".
class ParamSet {
 public:
  Tensor add(const std::string& name, Tensor t);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  std::int64_t count() const;  // total scalar parameters

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Stable 64-bit seed for a named purpose, independent of build order.
std::uint64_t child_seed(std::uint64_t seed, std::string_view purpose);

/// Draws initial values. Each tensor gets its own generator seeded from the
/// tensor name, so inserting a layer never perturbs the others. With
/// random = false every tensor is zero (used for shape-only counting).
class Initializer {
 public:
  Initializer(std::uint64_t seed, DType dtype, bool random = true) : seed_(seed), dtype_(dtype), random_(random) {}

  Tensor trunc_normal(const std::string& name, Shape shape, double std = 0.02) const;
  Tensor uniform_fan_in(const std::string& name, Shape shape, std::int64_t fan_in) const;
  Tensor constant(Shape shape, double value) const;
  Tensor a_log(Shape shape) const;  // log(1..N) along the last axis
  DType dtype() const { return dtype_; }

 private:
  std::uint64_t seed_;
  DType dtype_;
  bool random_;
};

namespace layers {

// Each layer has a build_* that registers "<prefix>.<name>" parameters and a
// forward that reads them back by the same prefix.

void build_linear(ParamSet& ps, const Initializer& init, const std::string& prefix, std::int64_t in,
                  std::int64_t out, bool bias);
Tensor linear(const Tensor& x, const ParamSet& ps, const std::string& prefix);

void build_norm(ParamSet& ps, const Initializer& init, const std::string& prefix, std::int64_t d);
Tensor layer_norm(const Tensor& x, const ParamSet& ps, const std::string& prefix);
Tensor instance_norm(const Tensor& x, const ParamSet& ps, const std::string& prefix);

void build_conv(ParamSet& ps, const Initializer& init, const std::string& prefix, std::int64_t cin,
                std::int64_t cout, int k, bool bias, int groups = 1);
Tensor conv(const Tensor& x, const ParamSet& ps, const std::string& prefix, Conv2dOptions opt = {});

void build_deconv(ParamSet& ps, const Initializer& init, const std::string& prefix, std::int64_t cin,
                  std::int64_t cout, int k);
Tensor deconv(const Tensor& x, const ParamSet& ps, const std::string& prefix, int stride);

/// Residual gated block over NHWC features with an SS2D mixer; expansion 2,
/// dt rank ceil(d / 16).
void build_vss_block(ParamSet& ps, const Initializer& init, const std::string& prefix, std::int64_t d,
                     std::int64_t d_state);
Tensor vss_block(const Tensor& x, const ParamSet& ps, const std::string& prefix,
                 ssm::ScanAlgorithm algo = ssm::ScanAlgorithm::sequential);

/// Per-direction view of the stacked "<prefix>.ssm.*" tensors.
ssm::Ss2dParams ss2d_params(const ParamSet& ps, const std::string& prefix);

/// conv7x7 stride 2 pad 3 -> instance norm. NCHW in and out.
void build_stem(ParamSet& ps, const Initializer& init, const std::string& prefix, std::int64_t cin,
                std::int64_t cout);
Tensor stem(const Tensor& x, const ParamSet& ps, const std::string& prefix);

/// Non-overlapping patch x patch projection -> layer norm. NCHW in, NHWC out.
void build_patch_embed(ParamSet& ps, const Initializer& init, const std::string& prefix, std::int64_t cin,
                       std::int64_t dout, int patch);
Tensor patch_embed(const Tensor& x, const ParamSet& ps, const std::string& prefix, int patch);

/// 2x2 neighbour concat -> LN(4d) -> linear 4d -> 2d. NHWC.
void build_patch_merge(ParamSet& ps, const Initializer& init, const std::string& prefix, std::int64_t d);
Tensor patch_merge(const Tensor& x, const ParamSet& ps, const std::string& prefix);

/// factor 2: linear d -> 2d, pixel shuffle to d/2 channels, LN.
/// factor 4: linear d -> 16d, pixel shuffle to d channels, LN. NHWC.
void build_patch_expand(ParamSet& ps, const Initializer& init, const std::string& prefix, std::int64_t d,
                        int factor);
Tensor patch_expand(const Tensor& x, const ParamSet& ps, const std::string& prefix, int factor);
std::int64_t patch_expand_channels(std::int64_t d, int factor);

/// Two conv3x3 -> instance norm -> LeakyReLU units plus an additive skip
/// (1x1 conv when the width changes). NCHW.
void build_res_block(ParamSet& ps, const Initializer& init, const std::string& prefix, std::int64_t cin,
                     std::int64_t cout);
Tensor res_block(const Tensor& x, const ParamSet& ps, const std::string& prefix);

/// Decoder level: fuse = Res2(cat(z_up, Res1(skip))), a 1x1 conv head to
/// `classes` channels (omitted when 0) and, when `deconv_out` > 0, a stride-2
/// transpose conv to the next level.
void build_upsample_block(ParamSet& ps, const Initializer& init, const std::string& prefix,
                          std::int64_t skip_c, std::int64_t width, std::int64_t classes, std::int64_t deconv_out);
struct UpsampleOut {
  Tensor z;     // next level input (undefined without deconv)
  Tensor head;  // [B, K, h, w], undefined without a head
};
UpsampleOut upsample_block(const Tensor& z_up, const Tensor& skip, const ParamSet& ps, const std::string& prefix);

}  // namespace layers
}  // namespace swum
