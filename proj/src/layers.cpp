#include "swum/layers.hpp"

#include <cmath>

namespace swum {

Tensor ParamSet::add(const std::string& name, Tensor t) {
  if (contains(name)) throw ConfigError("duplicate parameter name " + name);
  t.set_requires_grad(true);
  index_.emplace(name, items_.size());
  items_.emplace_back(name, t);
  return t;
}

const Tensor& ParamSet::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter " + name);
  return items_[it->second].second;
}

std::int64_t ParamSet::count() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : items_) n += t.numel();
  return n;
}

std::uint64_t child_seed(std::uint64_t seed, std::string_view purpose) {
  // FNV-1a over the purpose, then a splitmix64 finaliser.
  std::uint64_t h = 1469598103934665603ull;
  for (char c : purpose) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (h | 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace {

template <class Draw>
Tensor fill_with(Shape shape, DType dtype, Draw draw) {
  Tensor t = Tensor::zeros(std::move(shape), dtype);
  dispatch_float(dtype, [&](auto tag) {
    using T = decltype(tag);
    for (auto& v : t.data<T>()) v = static_cast<T>(draw());
  });
  return t;
}

}  // namespace

Tensor Initializer::trunc_normal(const std::string& name, Shape shape, double std) const {
  if (!random_) return Tensor::zeros(std::move(shape), dtype_);
  std::mt19937_64 rng(child_seed(seed_, name));
  std::normal_distribution<double> nd(0.0, std);
  return fill_with(std::move(shape), dtype_, [&] {
    for (;;) {
      const double v = nd(rng);
      if (std::abs(v) <= 2.0 * std) return v;
    }
  });
}

Tensor Initializer::uniform_fan_in(const std::string& name, Shape shape, std::int64_t fan_in) const {
  if (!random_) return Tensor::zeros(std::move(shape), dtype_);
  std::mt19937_64 rng(child_seed(seed_, name));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> ud(-bound, bound);
  return fill_with(std::move(shape), dtype_, [&] { return ud(rng); });
}

Tensor Initializer::constant(Shape shape, double value) const {
  return Tensor::full(std::move(shape), random_ ? value : 0.0, dtype_);
}

Tensor Initializer::a_log(Shape shape) const {
  const std::int64_t n = shape.back();
  Tensor t = Tensor::zeros(shape, dtype_);
  if (!random_) return t;
  dispatch_float(dtype_, [&](auto tag) {
    using T = decltype(tag);
    auto v = t.data<T>();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(std::log(static_cast<double>(i % n + 1)));
  });
  return t;
}

namespace layers {

void build_linear(ParamSet& ps, const Initializer& init, const std::string& prefix, std::int64_t in,
                  std::int64_t out, bool bias) {
  ps.add(prefix + ".weight", init.trunc_normal(prefix + ".weight", {out, in}));
  if (bias) ps.add(prefix + ".bias", init.constant({out}, 0.0));
}

Tensor linear(const Tensor& x, const ParamSet& ps, const std::string& prefix) {
  const std::string b = prefix + ".bias";
  return swum::linear(x, ps.get(prefix + ".weight"), ps.contains(b) ? ps.get(b) : Tensor{});
}

void build_norm(ParamSet& ps, const Initializer& init, const std::string& prefix, std::int64_t d) {
  ps.add(prefix + ".weight", init.constant({d}, 1.0));
  ps.add(prefix + ".bias", init.constant({d}, 0.0));
}

Tensor layer_norm(const Tensor& x, const ParamSet& ps, const std::string& prefix) {
  return swum::layer_norm(x, ps.get(prefix + ".weight"), ps.get(prefix + ".bias"));
}

Tensor instance_norm(const Tensor& x, const ParamSet& ps, const std::string& prefix) {
  return swum::instance_norm2d(x, ps.get(prefix + ".weight"), ps.get(prefix + ".bias"));
}

void build_conv(ParamSet& ps, const Initializer& init, const std::string& prefix, std::int64_t cin,
                std::int64_t cout, int k, bool bias, int groups) {
  const std::int64_t fan_in = cin / groups * k * k;
  ps.add(prefix + ".weight", init.uniform_fan_in(prefix + ".weight", {cout, cin / groups, k, k}, fan_in));
  if (bias) ps.add(prefix + ".bias", init.constant({cout}, 0.0));
}

Tensor conv(const Tensor& x, const ParamSet& ps, const std::string& prefix, Conv2dOptions opt) {
  const std::string b = prefix + ".bias";
  return conv2d(x, ps.get(prefix + ".weight"), ps.contains(b) ? ps.get(b) : Tensor{}, opt);
}

void build_deconv(ParamSet& ps, const Initializer& init, const std::string& prefix, std::int64_t cin,
                  std::int64_t cout, int k) {
  ps.add(prefix + ".weight", init.uniform_fan_in(prefix + ".weight", {cin, cout, k, k}, cout * k * k));
  ps.add(prefix + ".bias", init.constant({cout}, 0.0));
}

Tensor deconv(const Tensor& x, const ParamSet& ps, const std::string& prefix, int stride) {
  return conv_transpose2d(x, ps.get(prefix + ".weight"), ps.get(prefix + ".bias"), stride, 0);
}

// ---- VSS block ----

void build_vss_block(ParamSet& ps, const Initializer& init, const std::string& prefix, std::int64_t d,
                     std::int64_t d_state) {
  const std::int64_t di = 2 * d, r = ssm::default_dt_rank(d), N = d_state;
  build_norm(ps, init, prefix + ".norm", d);
  build_linear(ps, init, prefix + ".in_proj_x", d, di, false);
  build_linear(ps, init, prefix + ".in_proj_z", d, di, false);
  build_conv(ps, init, prefix + ".dwconv", di, di, 3, true, static_cast<int>(di));
  const std::string s = prefix + ".ssm";
  ps.add(s + ".x_proj", init.trunc_normal(s + ".x_proj", {4, r + 2 * N, di}));
  ps.add(s + ".dt_proj.weight", init.trunc_normal(s + ".dt_proj.weight", {4, di, r}));
  ps.add(s + ".dt_proj.bias", init.constant({4, di}, 0.0));
  ps.add(s + ".A_log", init.a_log({4, di, N}));
  ps.add(s + ".D", init.constant({4, di}, 1.0));
  build_norm(ps, init, prefix + ".out_norm", di);
  build_linear(ps, init, prefix + ".out_proj", di, d, false);
}

ssm::Ss2dParams ss2d_params(const ParamSet& ps, const std::string& prefix) {
  const std::string s = prefix + ".ssm";
  const Tensor& A_log = ps.get(s + ".A_log");
  const Tensor& D = ps.get(s + ".D");
  const Tensor& xp = ps.get(s + ".x_proj");
  const Tensor& dtw = ps.get(s + ".dt_proj.weight");
  const Tensor& dtb = ps.get(s + ".dt_proj.bias");
  ssm::Ss2dParams out;
  for (int v = 0; v < 4; ++v) {
    auto& p = out.dirs[v];
    p.d_inner = A_log.dim(1);
    p.d_state = A_log.dim(2);
    p.dt_rank = dtw.dim(2);
    p.A_log = select(A_log, 0, v);
    p.D_skip = select(D, 0, v);
    p.x_proj = select(xp, 0, v);
    p.dt_proj_weight = select(dtw, 0, v);
    p.dt_proj_bias = select(dtb, 0, v);
  }
  return out;
}

Tensor vss_block(const Tensor& x, const ParamSet& ps, const std::string& prefix, ssm::ScanAlgorithm algo) {
  const Tensor& nw = ps.get(prefix + ".norm.weight");
  if (x.ndim() != 4 || x.dim(3) != nw.dim(0))
    throw DimensionError("vss_block " + prefix + ": expected [B,H,W," + std::to_string(nw.dim(0)) + "], got " +
                         shape_str(x.shape()));
  const std::int64_t di = ps.get(prefix + ".dwconv.weight").dim(0);
  const Tensor h = layer_norm(x, ps, prefix + ".norm");
  Tensor u = nhwc_to_nchw(linear(h, ps, prefix + ".in_proj_x"));
  u = silu(conv(u, ps, prefix + ".dwconv", {1, 1, static_cast<int>(di)}));
  Tensor y = nchw_to_nhwc(ssm::ss2d(u, ss2d_params(ps, prefix), algo));
  y = layer_norm(y, ps, prefix + ".out_norm");
  y = mul(y, silu(linear(h, ps, prefix + ".in_proj_z")));
  return add(x, linear(y, ps, prefix + ".out_proj"));
}

// ---- encoder pieces ----

void build_stem(ParamSet& ps, const Initializer& init, const std::string& prefix, std::int64_t cin,
                std::int64_t cout) {
  build_conv(ps, init, prefix + ".conv", cin, cout, 7, true);
  build_norm(ps, init, prefix + ".norm", cout);
}

Tensor stem(const Tensor& x, const ParamSet& ps, const std::string& prefix) {
  if (x.ndim() != 4) throw DimensionError("stem: expected [B,C,H,W], got " + shape_str(x.shape()));
  if (x.dim(2) % 2 || x.dim(3) % 2)
    throw DimensionError("stem: H and W must be even, got " + std::to_string(x.dim(2)) + "x" + std::to_string(x.dim(3)));
  return instance_norm(conv(x, ps, prefix + ".conv", {2, 3, 1}), ps, prefix + ".norm");
}

void build_patch_embed(ParamSet& ps, const Initializer& init, const std::string& prefix, std::int64_t cin,
                       std::int64_t dout, int patch) {
  build_conv(ps, init, prefix + ".conv", cin, dout, patch, true);
  build_norm(ps, init, prefix + ".norm", dout);
}

Tensor patch_embed(const Tensor& x, const ParamSet& ps, const std::string& prefix, int patch) {
  if (x.ndim() != 4) throw DimensionError("patch_embed: expected [B,C,H,W], got " + shape_str(x.shape()));
  if (x.dim(2) % patch || x.dim(3) % patch)
    throw DimensionError("patch_embed: H and W must be divisible by " + std::to_string(patch) + ", got " +
                         std::to_string(x.dim(2)) + "x" + std::to_string(x.dim(3)));
  return layer_norm(nchw_to_nhwc(conv(x, ps, prefix + ".conv", {patch, 0, 1})), ps, prefix + ".norm");
}

void build_patch_merge(ParamSet& ps, const Initializer& init, const std::string& prefix, std::int64_t d) {
  build_norm(ps, init, prefix + ".norm", 4 * d);
  build_linear(ps, init, prefix + ".reduction", 4 * d, 2 * d, false);
}

Tensor patch_merge(const Tensor& x, const ParamSet& ps, const std::string& prefix) {
  return linear(layer_norm(merge_gather2x2(x), ps, prefix + ".norm"), ps, prefix + ".reduction");
}

std::int64_t patch_expand_channels(std::int64_t d, int factor) {
  if (factor == 2) {
    if (d % 2) throw DimensionError("patch_expand x2: channel count " + std::to_string(d) + " is odd");
    return d / 2;
  }
  if (factor == 4) return d;
  throw ConfigError("patch_expand: factor must be 2 or 4");
}

void build_patch_expand(ParamSet& ps, const Initializer& init, const std::string& prefix, std::int64_t d,
                        int factor) {
  const std::int64_t c = patch_expand_channels(d, factor);
  build_linear(ps, init, prefix + ".expand", d, c * factor * factor, false);
  build_norm(ps, init, prefix + ".norm", c);
}

Tensor patch_expand(const Tensor& x, const ParamSet& ps, const std::string& prefix, int factor) {
  return layer_norm(depth_to_space(linear(x, ps, prefix + ".expand"), factor), ps, prefix + ".norm");
}

// ---- decoder pieces ----

void build_res_block(ParamSet& ps, const Initializer& init, const std::string& prefix, std::int64_t cin,
                     std::int64_t cout) {
  build_conv(ps, init, prefix + ".conv1", cin, cout, 3, false);
  build_norm(ps, init, prefix + ".norm1", cout);
  build_conv(ps, init, prefix + ".conv2", cout, cout, 3, false);
  build_norm(ps, init, prefix + ".norm2", cout);
  if (cin != cout) build_conv(ps, init, prefix + ".skip", cin, cout, 1, false);
}

Tensor res_block(const Tensor& x, const ParamSet& ps, const std::string& prefix) {
  Tensor h = leaky_relu(instance_norm(conv(x, ps, prefix + ".conv1", {1, 1, 1}), ps, prefix + ".norm1"));
  h = leaky_relu(instance_norm(conv(h, ps, prefix + ".conv2", {1, 1, 1}), ps, prefix + ".norm2"));
  const std::string skip = prefix + ".skip";
  return add(h, ps.contains(skip + ".weight") ? conv(x, ps, skip) : x);
}

void build_upsample_block(ParamSet& ps, const Initializer& init, const std::string& prefix,
                          std::int64_t skip_c, std::int64_t width, std::int64_t classes, std::int64_t deconv_out) {
  build_res_block(ps, init, prefix + ".skip_res", skip_c, width);
  build_res_block(ps, init, prefix + ".fuse_res", 2 * width, width);
  if (classes > 0) build_conv(ps, init, prefix + ".head", width, classes, 1, true);
  if (deconv_out > 0) build_deconv(ps, init, prefix + ".deconv", width, deconv_out, 2);
}

UpsampleOut upsample_block(const Tensor& z_up, const Tensor& skip, const ParamSet& ps, const std::string& prefix) {
  if (z_up.ndim() != 4 || skip.ndim() != 4 || z_up.dim(0) != skip.dim(0) || z_up.dim(2) != skip.dim(2) ||
      z_up.dim(3) != skip.dim(3))
    throw DimensionError("upsample_block " + prefix + ": spatial mismatch between " + shape_str(z_up.shape()) +
                         " and skip " + shape_str(skip.shape()));
  const Tensor fused = res_block(concat({z_up, res_block(skip, ps, prefix + ".skip_res")}, 1), ps, prefix + ".fuse_res");
  UpsampleOut out;
  if (ps.contains(prefix + ".head.weight")) out.head = conv(fused, ps, prefix + ".head");
  if (ps.contains(prefix + ".deconv.weight")) out.z = deconv(fused, ps, prefix + ".deconv", 2);
  return out;
}

}  // namespace layers
}  // namespace swum
