#include "swum/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "swum/autograd.hpp"
#include "swum/losses.hpp"

namespace swum {

Tensor rand_uniform(Shape shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> U(lo, hi);
  Tensor t = Tensor::zeros(std::move(shape), DType::f64);
  for (auto& v : t.data<double>()) v = U(rng);
  return t;
}

namespace {

double rel_err(double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-3}); }

struct Probe {
  Tensor t;
  std::int64_t index;
};

// Central differences of `loss` at each probe, compared with the stored grads.
void compare(const std::function<double()>& loss, const std::vector<Probe>& probes, double h, GradcheckResult& res) {
  NoGradGuard ng;
  for (const auto& p : probes) {
    Tensor t = p.t;
    auto v = t.data<double>();
    const double orig = v[p.index];
    v[p.index] = orig + h;
    const double up = loss();
    v[p.index] = orig - h;
    const double down = loss();
    v[p.index] = orig;
    const double numeric = (up - down) / (2 * h);
    const Tensor g = t.grad();
    const double analytic = g.defined() ? g.at(p.index) : 0.0;
    res.max_rel_err = std::max(res.max_rel_err, rel_err(analytic, numeric));
    ++res.checked;
  }
}

std::vector<std::int64_t> pick(std::int64_t n, std::int64_t k, std::mt19937_64& rng) {
  std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  if (k >= n) return idx;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

}  // namespace

GradcheckResult gradcheck(const std::string& name, const GradFn& f, std::vector<Tensor> inputs, std::uint64_t seed,
                          std::int64_t per_input, double h, double tol) {
  GradcheckResult res;
  res.name = name;
  res.tol = tol;
  std::mt19937_64 rng(seed);
  for (auto& t : inputs)
    if (t.dtype() == DType::f64) t.set_requires_grad(true);
  const Tensor y = f(inputs);
  const Tensor r = rand_uniform(y.shape(), rng);
  backward(sum(mul(y, r)));
  std::vector<Probe> probes;
  for (auto& t : inputs)
    if (t.dtype() == DType::f64)
      for (auto i : pick(t.numel(), per_input, rng)) probes.push_back({t, i});
  compare([&] { return inner_product(f(inputs), r); }, probes, h, res);
  return res;
}

namespace {

// Registers a layer's parameters at f64 and checks the input and every
// parameter tensor.
GradcheckResult check_layer(const std::string& name, const std::function<void(ParamSet&, const Initializer&)>& build,
                            const std::function<Tensor(const std::vector<Tensor>&, const ParamSet&)>& fwd,
                            std::vector<Tensor> xs, std::uint64_t seed, std::int64_t per_input = 8) {
  ParamSet ps;
  build(ps, Initializer(seed, DType::f64));
  // Perturb unit/zero initial values so norm affines and biases are generic.
  std::mt19937_64 rng(seed ^ 0x5bd1e995);
  std::uniform_real_distribution<double> U(-0.1, 0.1);
  std::vector<std::string> names;
  std::vector<Tensor> inputs = xs;
  for (const auto& [n, t] : ps.items()) {
    Tensor p = t;
    if (n.find("A_log") == std::string::npos)
      for (auto& v : p.data<double>()) v += U(rng);
    names.push_back(n);
    inputs.push_back(p);
  }
  const std::size_t nx = xs.size();
  GradFn f = [&](const std::vector<Tensor>& in) {
    ParamSet q;
    for (std::size_t i = 0; i < names.size(); ++i) q.add(names[i], in[nx + i]);
    return fwd(std::vector<Tensor>(in.begin(), in.begin() + static_cast<std::ptrdiff_t>(nx)), q);
  };
  return gradcheck(name, f, inputs, seed, per_input);
}

// Values bounded away from zero, for ops with a kink there.
Tensor away_from_zero(Shape s, std::mt19937_64& rng) {
  Tensor t = rand_uniform(std::move(s), rng, 0.05, 1.0);
  std::bernoulli_distribution coin(0.5);
  for (auto& v : t.data<double>())
    if (coin(rng)) v = -v;
  return t;
}

}  // namespace

std::vector<GradcheckResult> run_op_suite(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto R = [&](Shape s, double lo = -1.0, double hi = 1.0) { return rand_uniform(std::move(s), rng, lo, hi); };
  std::vector<GradcheckResult> out;
  std::uint64_t k = seed;
  auto run = [&](const std::string& name, GradFn f, std::vector<Tensor> in) {
    out.push_back(gradcheck(name, f, std::move(in), ++k));
  };
  using V = const std::vector<Tensor>&;

  run("add", [](V in) { return add(in[0], in[1]); }, {R({2, 3, 4}), R({2, 3, 4})});
  run("sub", [](V in) { return sub(in[0], in[1]); }, {R({2, 3, 4}), R({2, 3, 4})});
  run("mul", [](V in) { return mul(in[0], in[1]); }, {R({2, 3, 4}), R({2, 3, 4})});
  run("add_scalar", [](V in) { return add_scalar(in[0], 0.7); }, {R({3, 5})});
  run("mul_scalar", [](V in) { return mul_scalar(in[0], -1.3); }, {R({3, 5})});
  run("neg", [](V in) { return neg(in[0]); }, {R({3, 5})});
  run("exp", [](V in) { return exp(in[0]); }, {R({3, 5})});
  run("log", [](V in) { return log(in[0]); }, {R({3, 5}, 0.5, 2.0)});
  run("add_bias_nchw", [](V in) { return add_bias(in[0], in[1], 1); }, {R({2, 3, 4, 5}), R({3})});
  run("add_bias_last", [](V in) { return add_bias(in[0], in[1], -1); }, {R({2, 4, 3}), R({3})});
  run("silu", [](V in) { return silu(in[0]); }, {R({4, 6}, -3, 3)});
  run("sigmoid", [](V in) { return sigmoid(in[0]); }, {R({4, 6}, -3, 3)});
  run("softplus", [](V in) { return softplus(in[0]); }, {R({4, 6}, -3, 3)});
  run("leaky_relu", [](V in) { return leaky_relu(in[0], 0.01); }, {away_from_zero({4, 6}, rng)});
  run("softmax_axis1", [](V in) { return softmax(in[0], 1); }, {R({2, 4, 3}, -2, 2)});
  run("softmax_last", [](V in) { return softmax(in[0], -1); }, {R({3, 5}, -2, 2)});
  run("sum", [](V in) { return sum(in[0]); }, {R({3, 4})});
  run("mean", [](V in) { return mean(in[0]); }, {R({3, 4})});
  run("reshape", [](V in) { return reshape(in[0], {6, 4}); }, {R({2, 3, 4})});
  run("permute", [](V in) { return permute(in[0], {2, 0, 1}); }, {R({2, 3, 4})});
  run("nchw_to_nhwc", [](V in) { return nchw_to_nhwc(in[0]); }, {R({2, 3, 2, 4})});
  run("concat", [](V in) { return concat({in[0], in[1]}, 1); }, {R({2, 3, 4}), R({2, 2, 4})});
  run("slice", [](V in) { return slice(in[0], 2, 1, 2); }, {R({2, 3, 4})});
  run("select", [](V in) { return select(in[0], 1, 2); }, {R({2, 3, 4})});
  run("merge_gather2x2", [](V in) { return merge_gather2x2(in[0]); }, {R({1, 4, 4, 3})});
  run("depth_to_space_2", [](V in) { return depth_to_space(in[0], 2); }, {R({1, 2, 3, 8})});
  run("depth_to_space_4", [](V in) { return depth_to_space(in[0], 4); }, {R({1, 1, 2, 32})});
  run("linear", [](V in) { return linear(in[0], in[1], in[2]); }, {R({2, 3, 5}), R({4, 5}), R({4})});
  run("linear_nobias", [](V in) { return linear(in[0], in[1]); }, {R({3, 5}), R({2, 5})});
  {
    std::mt19937_64 r7(7);
    out.push_back(gradcheck("conv2d", [](V in) { return conv2d(in[0], in[1], in[2], {1, 1, 1}); },
                            {rand_uniform({2, 3, 5, 5}, r7), rand_uniform({4, 3, 3, 3}, r7), rand_uniform({4}, r7)},
                            7));
  }
  run("conv2d_stride2", [](V in) { return conv2d(in[0], in[1], in[2], {2, 0, 1}); },
      {R({1, 2, 6, 6}), R({3, 2, 2, 2}), R({3})});
  run("conv2d_stride2_pad3_k7", [](V in) { return conv2d(in[0], in[1], in[2], {2, 3, 1}); },
      {R({1, 2, 8, 8}), R({2, 2, 7, 7}), R({2})});
  run("conv2d_depthwise", [](V in) { return conv2d(in[0], in[1], in[2], {1, 1, 3}); },
      {R({2, 3, 4, 5}), R({3, 1, 3, 3}), R({3})});
  run("conv2d_grouped", [](V in) { return conv2d(in[0], in[1], {}, {1, 1, 2}); }, {R({1, 4, 4, 4}), R({6, 2, 3, 3})});
  run("conv_transpose2d", [](V in) { return conv_transpose2d(in[0], in[1], in[2], 2, 0); },
      {R({1, 3, 2, 3}), R({3, 2, 2, 2}), R({2})});
  run("conv_transpose2d_k3p1", [](V in) { return conv_transpose2d(in[0], in[1], {}, 2, 1); },
      {R({2, 2, 3, 3}), R({2, 3, 3, 3})});
  run("layer_norm", [](V in) { return layer_norm(in[0], in[1], in[2]); }, {R({2, 3, 6}), R({6}), R({6})});
  run("instance_norm2d", [](V in) { return instance_norm2d(in[0], in[1], in[2]); },
      {R({2, 3, 4, 4}), R({3}), R({3})});

  for (auto algo : {ssm::ScanAlgorithm::sequential, ssm::ScanAlgorithm::parallel}) {
    const std::string tag = algo == ssm::ScanAlgorithm::sequential ? "sequential" : "parallel";
    run("selective_scan_" + tag,
        [algo](V in) { return ssm::selective_scan(in[0], in[1], in[2], in[3], in[4], in[5], algo); },
        {R({2, 6, 3}), R({2, 6, 3}, 0.1, 1.0), R({3, 4}, -2.0, -0.2), R({2, 6, 4}), R({2, 6, 4}), R({3})});
    run("s6_scan_" + tag,
        [algo](V in) {
          ssm::S6Params p;
          p.d_inner = 4, p.d_state = 3, p.dt_rank = 2;
          p.A_log = in[1], p.D_skip = in[2], p.x_proj = in[3], p.dt_proj_weight = in[4], p.dt_proj_bias = in[5];
          return ssm::s6_scan(in[0], p, algo);
        },
        {R({2, 7, 4}), R({4, 3}, -0.5, 1.0), R({4}), R({8, 4}), R({4, 2}), R({4})});
  }
  for (auto v : ssm::kAllDirections)
    run("expand_v" + std::to_string(static_cast<int>(v)), [v](V in) { return ssm::expand(in[0], v); },
        {R({2, 3, 3, 4})});
  run("merge", [](V in) { return ssm::merge({in[0], in[1], in[2], in[3]}, 3, 2); },
      {R({1, 6, 2}), R({1, 6, 2}), R({1, 6, 2}), R({1, 6, 2})});
  {
    ParamSet dummy;
    out.push_back(check_layer(
        "ss2d", [](ParamSet& ps, const Initializer& init) { layers::build_vss_block(ps, init, "b", 1, 2); },
        [](V in, const ParamSet& ps) { return ssm::ss2d(in[0], layers::ss2d_params(ps, "b")); }, {R({1, 2, 3, 3})},
        ++k));
  }
  {
    Tensor target = Tensor::zeros({2, 3, 4}, DType::u8);
    std::uniform_int_distribution<int> lab(0, 2);
    for (auto& v : target.data<std::uint8_t>()) v = static_cast<std::uint8_t>(lab(rng));
    run("dice_ce_loss", [target](V in) { return dice_ce_loss(in[0], target); }, {R({2, 3, 3, 4}, -2, 2)});
  }

  using namespace layers;
  out.push_back(check_layer(
      "vss_block", [](ParamSet& ps, const Initializer& init) { build_vss_block(ps, init, "b", 8, 4); },
      [](V in, const ParamSet& ps) { return vss_block(in[0], ps, "b"); }, {R({1, 3, 4, 8})}, ++k));
  out.push_back(check_layer(
      "patch_merge", [](ParamSet& ps, const Initializer& init) { build_patch_merge(ps, init, "m", 4); },
      [](V in, const ParamSet& ps) { return patch_merge(in[0], ps, "m"); }, {R({1, 4, 4, 4})}, ++k));
  for (int f : {2, 4})
    out.push_back(check_layer(
        "patch_expand_x" + std::to_string(f),
        [f](ParamSet& ps, const Initializer& init) { build_patch_expand(ps, init, "e", 8, f); },
        [f](V in, const ParamSet& ps) { return patch_expand(in[0], ps, "e", f); }, {R({1, 2, 2, 8})}, ++k));
  for (int p : {2, 4})
    out.push_back(check_layer(
        "patch_embed_" + std::to_string(p),
        [p](ParamSet& ps, const Initializer& init) { build_patch_embed(ps, init, "pe", 2, 6, p); },
        [p](V in, const ParamSet& ps) { return patch_embed(in[0], ps, "pe", p); }, {R({1, 2, 8, 8})}, ++k));
  out.push_back(check_layer(
      "stem", [](ParamSet& ps, const Initializer& init) { build_stem(ps, init, "s", 2, 4); },
      [](V in, const ParamSet& ps) { return stem(in[0], ps, "s"); }, {R({1, 2, 8, 8})}, ++k));
  out.push_back(check_layer(
      "res_block_widen", [](ParamSet& ps, const Initializer& init) { build_res_block(ps, init, "r", 2, 3); },
      [](V in, const ParamSet& ps) { return res_block(in[0], ps, "r"); }, {R({1, 2, 4, 4})}, ++k));
  out.push_back(check_layer(
      "res_block_same", [](ParamSet& ps, const Initializer& init) { build_res_block(ps, init, "r", 3, 3); },
      [](V in, const ParamSet& ps) { return res_block(in[0], ps, "r"); }, {R({2, 3, 4, 4})}, ++k));
  out.push_back(check_layer(
      "upsample_block",
      [](ParamSet& ps, const Initializer& init) { build_upsample_block(ps, init, "u", 2, 3, 2, 2); },
      [](V in, const ParamSet& ps) {
        auto o = upsample_block(in[0], in[1], ps, "u");
        return concat({reshape(o.z, {o.z.numel()}), reshape(o.head, {o.head.numel()})}, 0);
      },
      {R({1, 3, 4, 4}), R({1, 2, 4, 4})}, ++k));
  return out;
}

GradcheckResult run_network_check(Variant v, std::uint64_t seed, int samples, std::int64_t input_size, double tol) {
  ModelConfig cfg = ModelConfig::preset("tiny", v);
  Network net(cfg, seed, DType::f64);
  std::mt19937_64 rng(child_seed(seed, "gradcheck-network"));
  // Move norm affines and biases off their 1/0 initial values.
  std::uniform_real_distribution<double> U(-0.1, 0.1);
  for (const auto& [n, t] : net.params().items()) {
    if (n.find("A_log") != std::string::npos) continue;
    Tensor p = t;
    for (auto& x : p.data<double>()) x += U(rng);
  }
  const Tensor x = rand_uniform({1, cfg.input_channels, input_size, input_size}, rng, 0.0, 1.0);
  const auto heads = net.forward(x);
  std::vector<Tensor> rs;
  Tensor L;
  for (const auto& h : heads) {
    rs.push_back(rand_uniform(h.shape(), rng));
    const Tensor term = sum(mul(h, rs.back()));
    L = L.defined() ? add(L, term) : term;
  }
  backward(L);

  GradcheckResult res;
  res.name = std::string("network_") + std::string(variant_name(v));
  res.tol = tol;
  const auto& items = net.params().items();
  std::vector<Probe> probes;
  for (auto ti : pick(static_cast<std::int64_t>(items.size()), samples, rng)) {
    const Tensor& t = items[static_cast<std::size_t>(ti)].second;
    std::uniform_int_distribution<std::int64_t> E(0, t.numel() - 1);
    probes.push_back({t, E(rng)});
  }
  compare(
      [&] {
        double acc = 0;
        const auto hs = net.forward(x);
        for (std::size_t i = 0; i < hs.size(); ++i) acc += inner_product(hs[i], rs[i]);
        return acc;
      },
      probes, 1e-5, res);
  return res;
}

}  // namespace swum
