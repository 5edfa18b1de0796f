#include "swum/model.hpp"

#include <fstream>
#include <set>

#include "swum/instrument.hpp"

namespace swum {

using nlohmann::json;

std::string_view variant_name(Variant v) { return v == Variant::umamba ? "umamba" : "umamba_dagger"; }

Variant variant_from_name(std::string_view s) {
  if (s == "umamba") return Variant::umamba;
  if (s == "umamba_dagger" || s == "dagger") return Variant::dagger;
  throw ConfigError("unknown variant '" + std::string(s) + "' (expected umamba or umamba_dagger)");
}

void ModelConfig::validate() const {
  const int S = num_stages();
  if (S < 3) throw ConfigError("stage_dims needs at least 3 entries, got " + std::to_string(S));
  for (int i = 0; i < S; ++i) {
    if (stage_dims[i] < 1) throw ConfigError("stage_dims entries must be positive");
    if (i > 0 && stage_dims[i] != 2 * stage_dims[i - 1])
      throw ConfigError("stage_dims must double per stage: stage_dims[" + std::to_string(i) + "] = " +
                        std::to_string(stage_dims[i]) + ", expected " + std::to_string(2 * stage_dims[i - 1]));
  }
  if (static_cast<int>(vss_depths.size()) != S - 1)
    throw ConfigError("vss_depths needs " + std::to_string(S - 1) + " entries (one per stage after the first), got " +
                      std::to_string(vss_depths.size()));
  for (auto d : vss_depths)
    if (d < 1) throw ConfigError("vss_depths entries must be >= 1");
  if (d_state < 1) throw ConfigError("d_state must be >= 1");
  if (num_classes < 1) throw ConfigError("num_classes must be >= 1");
  if (input_channels < 1) throw ConfigError("input_channels must be >= 1");
  if (decoder_vss_depth < 1) throw ConfigError("decoder_vss_depth must be >= 1");
  if (input_h < 1 || input_w < 1 || input_h % divisor() || input_w % divisor())
    throw ConfigError("input_size " + std::to_string(input_h) + "x" + std::to_string(input_w) +
                      " must be positive multiples of " + std::to_string(divisor()));
}

void ModelConfig::check_input(std::int64_t h, std::int64_t w) const {
  if (h % divisor() || w % divisor())
    throw DimensionError("input " + std::to_string(h) + "x" + std::to_string(w) + " is not divisible by " +
                         std::to_string(divisor()));
}

json ModelConfig::to_json() const {
  json j;
  j["variant"] = std::string(variant_name(variant));
  j["stage_dims"] = stage_dims;
  j["vss_depths"] = vss_depths;
  j["d_state"] = d_state;
  j["num_classes"] = num_classes;
  j["input_channels"] = input_channels;
  j["input_size"] = {input_h, input_w};
  j["deep_supervision"] = deep_supervision;
  j["decoder_vss_depth"] = decoder_vss_depth;
  return j;
}

ModelConfig ModelConfig::from_json(const json& j) {
  static const std::set<std::string> known = {"variant",        "stage_dims",       "vss_depths",
                                              "d_state",        "num_classes",      "input_channels",
                                              "input_size",     "deep_supervision", "decoder_vss_depth"};
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigError("unknown model config field '" + k + "'");
  ModelConfig c;
  try {
    if (j.contains("variant")) c.variant = variant_from_name(j.at("variant").get<std::string>());
    if (j.contains("stage_dims")) c.stage_dims = j.at("stage_dims").get<std::vector<std::int64_t>>();
    if (j.contains("vss_depths")) c.vss_depths = j.at("vss_depths").get<std::vector<std::int64_t>>();
    if (j.contains("d_state")) c.d_state = j.at("d_state").get<std::int64_t>();
    if (j.contains("num_classes")) c.num_classes = j.at("num_classes").get<std::int64_t>();
    if (j.contains("input_channels")) c.input_channels = j.at("input_channels").get<std::int64_t>();
    if (j.contains("input_size")) {
      const auto sz = j.at("input_size").get<std::vector<std::int64_t>>();
      if (sz.size() != 2) throw ConfigError("input_size must be [H, W]");
      c.input_h = sz[0];
      c.input_w = sz[1];
    }
    if (j.contains("deep_supervision")) c.deep_supervision = j.at("deep_supervision").get<bool>();
    if (j.contains("decoder_vss_depth")) c.decoder_vss_depth = j.at("decoder_vss_depth").get<std::int64_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

ModelConfig ModelConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

ModelConfig ModelConfig::preset(std::string_view name, Variant v) {
  ModelConfig c;
  c.variant = v;
  if (name == "abdomen_mri") {
    c.input_channels = 1, c.num_classes = 14, c.input_h = c.input_w = 320;
  } else if (name == "endoscopy") {
    c.input_channels = 3, c.num_classes = 8, c.input_h = 384, c.input_w = 640;
  } else if (name == "microscopy") {
    c.input_channels = 3, c.num_classes = 3, c.input_h = c.input_w = 512;
  } else if (name == "tiny") {
    c.stage_dims = {8, 16, 32, 64, 128};
    c.vss_depths = {1, 1, 1, 1};
    c.input_channels = 1, c.num_classes = 3, c.input_h = c.input_w = 64;
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "'");
  }
  c.validate();
  return c;
}

std::vector<int> head_strides(const ModelConfig& cfg) {
  const int S = cfg.num_stages();
  std::vector<int> s{1};
  if (!cfg.deep_supervision) return s;
  const int first = cfg.variant == Variant::umamba ? 1 : 2;
  for (int l = first; l <= S - 1; ++l) s.push_back(1 << l);
  return s;
}

std::string module_of(std::string_view name) {
  const auto a = name.find('.');
  if (a == std::string_view::npos) return std::string(name);
  const auto b = name.find('.', a + 1);
  return std::string(name.substr(0, b));
}

bool is_pretrained_designated(std::string_view name) {
  if (name.rfind("encoder.stage", 0) != 0) return false;
  const auto a = name.find('.', 8);
  if (a == std::string_view::npos) return false;
  const auto rest = name.substr(a + 1);
  return rest.rfind("block", 0) == 0 || rest.rfind("merge.", 0) == 0;
}

namespace {

std::string stage(int s) { return "encoder.stage" + std::to_string(s); }
std::string block(int s, std::int64_t j) { return stage(s) + ".block" + std::to_string(j + 1); }
std::string level(int l) { return "decoder.level" + std::to_string(l); }

}  // namespace

Network::Network(ModelConfig cfg, std::uint64_t seed, DType dtype, bool random_init)
    : cfg_(std::move(cfg)), dtype_(dtype) {
  cfg_.validate();
  if (!is_floating(dtype)) throw ConfigError("network dtype must be f32 or f64");
  const Initializer init(child_seed(seed, "network"), dtype, random_init);
  const int S = cfg_.num_stages();
  const auto& D = cfg_.stage_dims;
  const std::int64_t K = cfg_.num_classes, C = cfg_.input_channels, N = cfg_.d_state;
  auto& ps = params_;
  using namespace layers;

  // Encoder: stage s (1-based) works at 1/2^s with width D[s-1].
  if (cfg_.variant == Variant::umamba) {
    build_stem(ps, init, "encoder.stem", C, D[0]);
    build_patch_embed(ps, init, "encoder.patch_embed", D[0], D[1], 2);
  } else {
    build_patch_embed(ps, init, "encoder.patch_embed", C, D[1], 4);
  }
  for (int s = 2; s <= S; ++s) {
    if (s > 2) build_patch_merge(ps, init, stage(s) + ".merge", D[s - 2]);
    for (std::int64_t j = 0; j < cfg_.vss_depths[s - 2]; ++j) build_vss_block(ps, init, block(s, j), D[s - 1], N);
  }

  const bool ds = cfg_.deep_supervision;
  if (cfg_.variant == Variant::umamba) {
    // Level l sits at 1/2^l with width D[l]; level 0 takes the raw input as skip.
    build_deconv(ps, init, "decoder.top", D[S - 1], D[S - 1], 2);
    for (int l = S - 1; l >= 0; --l) {
      const std::int64_t skip_c = l == 0 ? C : D[l - 1];
      build_upsample_block(ps, init, level(l), skip_c, D[l], (l == 0 || ds) ? K : 0, l > 0 ? D[l - 1] : 0);
    }
  } else {
    // Level l sits at 1/2^l with width D[l-1]; skips from encoder stage l.
    for (int l = S - 1; l >= 2; --l) {
      const std::int64_t d = D[l - 1];
      build_patch_expand(ps, init, level(l) + ".up", 2 * d, 2);
      build_linear(ps, init, level(l) + ".concat_proj", 2 * d, d, true);
      for (std::int64_t j = 0; j < cfg_.decoder_vss_depth; ++j)
        build_vss_block(ps, init, level(l) + ".block" + std::to_string(j + 1), d, N);
      if (ds) build_linear(ps, init, level(l) + ".head", d, K, true);
    }
    build_patch_expand(ps, init, "decoder.final.up", D[1], 4);
    build_linear(ps, init, "decoder.final.head", D[1], K, true);
  }
}

Network Network::clone() const {
  Network n;
  n.cfg_ = cfg_;
  n.dtype_ = dtype_;
  for (const auto& [name, t] : params_.items()) n.params_.add(name, t.clone());
  return n;
}

std::vector<Tensor> Network::encode_nhwc(const Tensor& x, ssm::ScanAlgorithm algo) const {
  if (x.ndim() != 4) throw DimensionError("network input must be [B,C,H,W], got " + shape_str(x.shape()));
  if (x.dim(1) != cfg_.input_channels)
    throw DimensionError("network expects " + std::to_string(cfg_.input_channels) + " input channels (axis 1), got " +
                         std::to_string(x.dim(1)));
  cfg_.check_input(x.dim(2), x.dim(3));
  const int S = cfg_.num_stages();
  std::vector<Tensor> f(S + 1);
  Tensor t;
  if (cfg_.variant == Variant::umamba) {
    {
      ModuleScope m("encoder.stem");
      f[1] = layers::stem(x, params_, "encoder.stem");
    }
    ModuleScope m("encoder.patch_embed");
    t = layers::patch_embed(f[1], params_, "encoder.patch_embed", 2);
  } else {
    ModuleScope m("encoder.patch_embed");
    t = layers::patch_embed(x, params_, "encoder.patch_embed", 4);
  }
  for (int s = 2; s <= S; ++s) {
    ModuleScope m(stage(s));
    if (s > 2) t = layers::patch_merge(t, params_, stage(s) + ".merge");
    for (std::int64_t j = 0; j < cfg_.vss_depths[s - 2]; ++j) t = layers::vss_block(t, params_, block(s, j), algo);
    f[s] = t;
  }
  return f;
}

std::vector<Tensor> Network::encode(const Tensor& x, ssm::ScanAlgorithm algo) const {
  auto f = encode_nhwc(x, algo);
  std::vector<Tensor> out(f.size() - 1);
  for (std::size_t s = 1; s < f.size(); ++s) {
    if (!f[s].defined()) continue;
    out[s - 1] = (s == 1) ? f[s] : nhwc_to_nchw(f[s]);
  }
  return out;
}

std::vector<Tensor> Network::forward(const Tensor& x, ssm::ScanAlgorithm algo) const {
  return cfg_.variant == Variant::umamba ? forward_umamba(x, algo) : forward_dagger(x, algo);
}

std::vector<Tensor> Network::forward_umamba(const Tensor& x, ssm::ScanAlgorithm algo) const {
  const int S = cfg_.num_stages();
  auto f = encode_nhwc(x, algo);
  for (int s = 2; s <= S; ++s) {
    ModuleScope m(stage(s));
    f[s] = nhwc_to_nchw(f[s]);
  }
  Tensor z;
  {
    ModuleScope m("decoder.top");
    z = layers::deconv(f[S], params_, "decoder.top", 2);
  }
  std::vector<Tensor> heads;
  for (int l = S - 1; l >= 0; --l) {
    ModuleScope m(level(l));
    auto out = layers::upsample_block(z, l == 0 ? x : f[l], params_, level(l));
    if (out.head.defined()) heads.push_back(out.head);
    z = out.z;
  }
  return {heads.rbegin(), heads.rend()};
}

std::vector<Tensor> Network::forward_dagger(const Tensor& x, ssm::ScanAlgorithm algo) const {
  const int S = cfg_.num_stages();
  auto f = encode_nhwc(x, algo);
  Tensor z = f[S];
  std::vector<Tensor> heads;
  for (int l = S - 1; l >= 2; --l) {
    ModuleScope m(level(l));
    z = layers::patch_expand(z, params_, level(l) + ".up", 2);
    z = layers::linear(concat({z, f[l]}, 3), params_, level(l) + ".concat_proj");
    for (std::int64_t j = 0; j < cfg_.decoder_vss_depth; ++j)
      z = layers::vss_block(z, params_, level(l) + ".block" + std::to_string(j + 1), algo);
    if (params_.contains(level(l) + ".head.weight"))
      heads.push_back(nhwc_to_nchw(layers::linear(z, params_, level(l) + ".head")));
  }
  ModuleScope m("decoder.final");
  z = layers::patch_expand(z, params_, "decoder.final.up", 4);
  heads.push_back(nhwc_to_nchw(layers::linear(z, params_, "decoder.final.head")));
  return {heads.rbegin(), heads.rend()};
}

}  // namespace swum
