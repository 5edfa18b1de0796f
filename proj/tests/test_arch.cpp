#include <gtest/gtest.h>

#include <random>

#include "swum/autograd.hpp"
#include "swum/model.hpp"
#include "swum/ops.hpp"
#include "test_util.hpp"

using namespace swum;
using swum::testing::rnd;

namespace {

ParamSet build(const std::function<void(ParamSet&, const Initializer&)>& f, std::uint64_t seed = 1) {
  ParamSet ps;
  f(ps, Initializer(seed, DType::f64));
  return ps;
}

void fill(Tensor t, double v) {
  for (auto& x : t.data<double>()) x = v;
}

// Mirrors the last axis of an NCHW tensor.
Tensor flip_w(const Tensor& x) {
  Tensor y = x.clone();
  const std::int64_t W = x.dim(3), rows = x.numel() / W;
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t j = 0; j < W; ++j) y.data<double>()[r * W + j] = x.at(r * W + W - 1 - j);
  return y;
}

}  // namespace

TEST(VssBlock, ZeroOutputProjectionIsIdentity) {
  auto ps = build([](ParamSet& p, const Initializer& i) { layers::build_vss_block(p, i, "b", 8, 4); });
  fill(ps.get("b.out_proj.weight"), 0.0);
  const Tensor x = rnd({2, 3, 5, 8}, 2);
  EXPECT_TRUE(identical(layers::vss_block(x, ps, "b"), x));
}

TEST(VssBlock, PreservesShape) {
  for (auto [B, H, W, d] : {std::array<std::int64_t, 4>{1, 4, 4, 8}, std::array<std::int64_t, 4>{2, 7, 5, 16}}) {
    auto ps = build([d = d](ParamSet& p, const Initializer& i) { layers::build_vss_block(p, i, "b", d, 4); });
    const Tensor x = rnd({B, H, W, d}, 3);
    EXPECT_EQ(layers::vss_block(x, ps, "b").shape(), x.shape());
  }
}

TEST(VssBlock, InternalWidths) {
  auto ps = build([](ParamSet& p, const Initializer& i) { layers::build_vss_block(p, i, "b", 96, 16); });
  EXPECT_EQ(ps.get("b.in_proj_x.weight").shape(), (Shape{192, 96}));
  EXPECT_EQ(ps.get("b.dwconv.weight").shape(), (Shape{192, 1, 3, 3}));
  EXPECT_EQ(ps.get("b.ssm.x_proj").shape(), (Shape{4, 6 + 32, 192}));
  EXPECT_EQ(ps.get("b.ssm.A_log").shape(), (Shape{4, 192, 16}));
  EXPECT_EQ(ps.get("b.out_proj.weight").shape(), (Shape{96, 192}));
  const Tensor& A = ps.get("b.ssm.A_log");
  for (int n = 0; n < 16; ++n) EXPECT_DOUBLE_EQ(A.at(n), std::log(n + 1.0));
  for (double v : ps.get("b.ssm.D").to_vector()) EXPECT_EQ(v, 1.0);
}

TEST(VssBlock, ChannelMismatchRejected) {
  auto ps = build([](ParamSet& p, const Initializer& i) { layers::build_vss_block(p, i, "b", 8, 4); });
  EXPECT_THROW(layers::vss_block(rnd({1, 2, 2, 4}, 1), ps, "b"), DimensionError);
}

TEST(Stem, HalvesResolutionForAnyChannelCount) {
  for (std::int64_t C : {1, 3}) {
    auto ps = build([C](ParamSet& p, const Initializer& i) { layers::build_stem(p, i, "s", C, 48); });
    EXPECT_EQ(layers::stem(rnd({1, C, 64, 64}, 4), ps, "s").shape(), (Shape{1, 48, 32, 32}));
  }
}

TEST(Stem, ConstantInputGivesConstantInteriorBeforeNorm) {
  auto ps = build([](ParamSet& p, const Initializer& i) { layers::build_stem(p, i, "s", 2, 4); });
  const Tensor y = layers::conv(Tensor::full({1, 2, 16, 16}, 0.7, DType::f64), ps, "s.conv", {2, 3, 1});
  ASSERT_EQ(y.shape(), (Shape{1, 4, 8, 8}));
  // Output (i, j) reads rows 2i-3 .. 2i+3; interior is i in [2, 6].
  for (int o = 0; o < 4; ++o)
    for (int i = 2; i <= 6; ++i)
      for (int j = 2; j <= 6; ++j) EXPECT_NEAR(y.at((o * 8 + i) * 8 + j), y.at((o * 8 + 2) * 8 + 2), 1e-13);
}

TEST(Stem, OddExtentRejected) {
  auto ps = build([](ParamSet& p, const Initializer& i) { layers::build_stem(p, i, "s", 1, 4); });
  EXPECT_THROW(layers::stem(rnd({1, 1, 9, 8}, 1), ps, "s"), DimensionError);
}

TEST(PatchEmbed, Shapes) {
  auto p2 = build([](ParamSet& p, const Initializer& i) { layers::build_patch_embed(p, i, "e", 8, 16, 2); });
  EXPECT_EQ(layers::patch_embed(rnd({1, 8, 32, 32}, 1), p2, "e", 2).shape(), (Shape{1, 16, 16, 16}));
  auto p4 = build([](ParamSet& p, const Initializer& i) { layers::build_patch_embed(p, i, "e", 3, 96, 4); });
  EXPECT_EQ(layers::patch_embed(rnd({1, 3, 64, 64}, 1), p4, "e", 4).shape(), (Shape{1, 16, 16, 96}));
  EXPECT_THROW(layers::patch_embed(rnd({1, 3, 62, 64}, 1), p4, "e", 4), DimensionError);
}

TEST(PatchEmbed, ZerosGiveConstantMap) {
  auto ps = build([](ParamSet& p, const Initializer& i) { layers::build_patch_embed(p, i, "e", 2, 6, 2); });
  Tensor(ps.get("e.conv.bias")).copy_from(rnd({6}, 9));
  const Tensor y = layers::patch_embed(Tensor::zeros({1, 2, 8, 8}, DType::f64), ps, "e", 2);
  const Tensor want = layers::layer_norm(reshape(ps.get("e.conv.bias"), {1, 6}), ps, "e.norm");
  for (std::int64_t p = 0; p < 16; ++p)
    for (int c = 0; c < 6; ++c) EXPECT_EQ(y.at(p * 6 + c), want.at(c));
}

TEST(PatchMerge, TwoByTwoToOneByOne) {
  auto ps = build([](ParamSet& p, const Initializer& i) { layers::build_patch_merge(p, i, "m", 5); });
  EXPECT_EQ(layers::patch_merge(rnd({2, 2, 2, 5}, 1), ps, "m").shape(), (Shape{2, 1, 1, 10}));
  EXPECT_THROW(layers::patch_merge(rnd({1, 3, 2, 5}, 1), ps, "m"), DimensionError);
}

TEST(PatchMerge, SlotMapping) {
  // Pixel (dy, dx) of each cell holds the value 10*dy + dx + 100*cell.
  const Tensor x = Tensor::from_vector<double>(
      {1, 2, 4, 1}, {0, 1, 100, 101, 10, 11, 110, 111});
  const Tensor g = merge_gather2x2(x);
  ASSERT_EQ(g.shape(), (Shape{1, 1, 2, 4}));
  EXPECT_EQ(g.to_vector(), (std::vector<double>{0, 10, 1, 11, 100, 110, 101, 111}));
}

TEST(PatchExpand, Shapes) {
  auto p2 = build([](ParamSet& p, const Initializer& i) { layers::build_patch_expand(p, i, "x", 96, 2); });
  EXPECT_EQ(layers::patch_expand(rnd({1, 1, 1, 96}, 1), p2, "x", 2).shape(), (Shape{1, 2, 2, 48}));
  auto p4 = build([](ParamSet& p, const Initializer& i) { layers::build_patch_expand(p, i, "x", 8, 4); });
  EXPECT_EQ(layers::patch_expand(rnd({2, 3, 2, 8}, 1), p4, "x", 4).shape(), (Shape{2, 12, 8, 8}));
  EXPECT_EQ(p4.get("x.expand.weight").shape(), (Shape{128, 8}));
}

TEST(PatchExpand, ConstantInputTilesTheSingleCell) {
  auto ps = build([](ParamSet& p, const Initializer& i) { layers::build_patch_expand(p, i, "x", 6, 2); });
  const Tensor v = rnd({1, 1, 1, 6}, 3);
  std::vector<double> tiled;
  for (int k = 0; k < 12; ++k)
    for (int c = 0; c < 6; ++c) tiled.push_back(v.at(c));
  const Tensor one = layers::patch_expand(v, ps, "x", 2);
  const Tensor many = layers::patch_expand(Tensor::from_vector<double>({1, 3, 4, 6}, tiled), ps, "x", 2);
  for (std::int64_t i = 0; i < 6; ++i)
    for (std::int64_t j = 0; j < 8; ++j)
      for (int c = 0; c < 3; ++c)
        EXPECT_NEAR(many.at((i * 8 + j) * 3 + c), one.at(((i % 2) * 2 + j % 2) * 3 + c), 1e-13);
}

TEST(ResBlock, ZeroSecondConvDegeneratesToSkip) {
  auto ps = build([](ParamSet& p, const Initializer& i) { layers::build_res_block(p, i, "r", 3, 3); });
  fill(ps.get("r.conv2.weight"), 0.0);
  const Tensor x = rnd({2, 3, 5, 5}, 4);
  EXPECT_TRUE(identical(layers::res_block(x, ps, "r"), x));
}

TEST(ResBlock, WidthChangeUsesProjection) {
  auto ps = build([](ParamSet& p, const Initializer& i) { layers::build_res_block(p, i, "r", 2, 5); });
  EXPECT_TRUE(ps.contains("r.skip.weight"));
  EXPECT_EQ(layers::res_block(rnd({1, 2, 4, 6}, 1), ps, "r").shape(), (Shape{1, 5, 4, 6}));
  auto same = build([](ParamSet& p, const Initializer& i) { layers::build_res_block(p, i, "r", 4, 4); });
  EXPECT_FALSE(same.contains("r.skip.weight"));
}

TEST(UpsampleBlock, HeadWidthAndDeconvResolution) {
  auto ps = build([](ParamSet& p, const Initializer& i) { layers::build_upsample_block(p, i, "u", 3, 4, 7, 2); });
  const auto out = layers::upsample_block(rnd({1, 4, 3, 5}, 1), rnd({1, 3, 3, 5}, 2), ps, "u");
  EXPECT_EQ(out.head.shape(), (Shape{1, 7, 3, 5}));
  EXPECT_EQ(out.z.shape(), (Shape{1, 2, 6, 10}));
  EXPECT_THROW(layers::upsample_block(rnd({1, 4, 3, 5}, 1), rnd({1, 3, 3, 4}, 2), ps, "u"), DimensionError);
}

TEST(UpsampleBlock, GradientReachesBothInputs) {
  auto ps = build([](ParamSet& p, const Initializer& i) { layers::build_upsample_block(p, i, "u", 3, 4, 2, 2); });
  Tensor z = rnd({1, 4, 4, 4}, 1), s = rnd({1, 3, 4, 4}, 2);
  z.set_requires_grad(true);
  s.set_requires_grad(true);
  const auto out = layers::upsample_block(z, s, ps, "u");
  backward(add(sum(mul(out.z, rnd(out.z.shape(), 3))), sum(mul(out.head, rnd(out.head.shape(), 4)))));
  double gz = 0, gs = 0;
  for (double v : z.grad().to_vector()) gz += std::abs(v);
  for (double v : s.grad().to_vector()) gs += std::abs(v);
  EXPECT_GT(gz, 0);
  EXPECT_GT(gs, 0);
}

TEST(Network, TinyUmambaHeads) {
  const auto cfg = ModelConfig::preset("tiny", Variant::umamba);
  Network net(cfg, 1, DType::f64);
  const auto heads = net.forward(rnd({1, 1, 64, 64}, 1, 0, 1));
  ASSERT_EQ(heads.size(), 5u);
  EXPECT_EQ(heads[0].shape(), (Shape{1, 3, 64, 64}));
  const std::vector<int> strides = {1, 2, 4, 8, 16};
  EXPECT_EQ(head_strides(cfg), strides);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(heads[i].shape(), (Shape{1, 3, 64 / strides[i], 64 / strides[i]}));
}

TEST(Network, TinyDaggerHeads) {
  const auto cfg = ModelConfig::preset("tiny", Variant::dagger);
  Network net(cfg, 1, DType::f64);
  const auto heads = net.forward(rnd({2, 1, 64, 64}, 1, 0, 1));
  const std::vector<int> strides = {1, 4, 8, 16};
  EXPECT_EQ(head_strides(cfg), strides);
  ASSERT_EQ(heads.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(heads[i].shape(), (Shape{2, 3, 64 / strides[i], 64 / strides[i]}));
}

TEST(Network, DaggerHasNoHalfOrFullResolutionSkip) {
  Network net(ModelConfig::preset("tiny", Variant::dagger), 1);
  for (const auto& [n, t] : net.params().items()) {
    EXPECT_EQ(n.rfind("decoder.level1", 0), std::string::npos) << n;
    EXPECT_EQ(n.rfind("decoder.level0", 0), std::string::npos) << n;
    EXPECT_EQ(n.rfind("encoder.stem", 0), std::string::npos) << n;
  }
  EXPECT_EQ(net.params().get("encoder.patch_embed.conv.weight").shape(), (Shape{16, 1, 4, 4}));
}

TEST(Network, WithoutDeepSupervisionOnlyFinalHead) {
  for (auto v : {Variant::umamba, Variant::dagger}) {
    auto cfg = ModelConfig::preset("tiny", v);
    cfg.deep_supervision = false;
    Network net(cfg, 1);
    const auto heads = net.forward(rnd({1, 1, 32, 32}, 2).to(DType::f32));
    ASSERT_EQ(heads.size(), 1u);
    EXPECT_EQ(heads[0].shape(), (Shape{1, 3, 32, 32}));
  }
}

TEST(Network, EncoderStageResolutionsAndWidths) {
  const auto cfg = ModelConfig::preset("tiny", Variant::umamba);
  Network net(cfg, 2, DType::f64);
  const auto f = net.encode(rnd({1, 1, 64, 64}, 3));
  ASSERT_EQ(f.size(), 5u);
  for (int s = 1; s <= 5; ++s)
    EXPECT_EQ(f[s - 1].shape(), (Shape{1, cfg.stage_dims[s - 1], 64 >> s, 64 >> s})) << "stage " << s;
}

TEST(Network, SameSeedSameParameters) {
  const auto cfg = ModelConfig::preset("tiny", Variant::dagger);
  Network a(cfg, 42), b(cfg, 42), c(cfg, 43);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    EXPECT_TRUE(identical(a.params().items()[i].second, b.params().items()[i].second));
    any_diff |= !identical(a.params().items()[i].second, c.params().items()[i].second);
  }
  EXPECT_TRUE(any_diff);
}

TEST(Network, FiniteOutputsAcrossRandomConfigs) {
  std::mt19937_64 rng(77);
  for (int c = 0; c < 100; ++c) {
    ModelConfig cfg;
    cfg.variant = rng() % 2 ? Variant::umamba : Variant::dagger;
    const int S = 3 + static_cast<int>(rng() % 3);
    const std::int64_t base = 2 + 2 * static_cast<std::int64_t>(rng() % 2);
    cfg.stage_dims.clear();
    for (int s = 0; s < S; ++s) cfg.stage_dims.push_back(base << s);
    cfg.vss_depths.assign(S - 1, 1);
    cfg.d_state = 1 + static_cast<std::int64_t>(rng() % 4);
    cfg.num_classes = 1 + static_cast<std::int64_t>(rng() % 3);
    cfg.input_channels = rng() % 2 ? 1 : 3;
    cfg.decoder_vss_depth = 1;
    cfg.input_h = cfg.divisor() * (1 + static_cast<std::int64_t>(rng() % 2));
    cfg.input_w = cfg.divisor();
    cfg.validate();
    Network net(cfg, rng());
    const Tensor x = rnd({1, cfg.input_channels, cfg.input_h, cfg.input_w}, rng(), -3, 3).to(DType::f32);
    for (const auto& h : net.forward(x)) ASSERT_TRUE(all_finite(h)) << "config " << c << " " << cfg.to_json().dump();
  }
}

TEST(Network, DirectionAware) {
  Network net(ModelConfig::preset("tiny", Variant::umamba), 5, DType::f64);
  const Tensor x = rnd({1, 1, 32, 32}, 6);
  const Tensor y = net.forward(x)[0];
  const Tensor y_flip = flip_w(net.forward(flip_w(x))[0]);
  EXPECT_GT(max_abs_diff(y, y_flip), 1e-6);
}

TEST(Network, InputChecks) {
  Network net(ModelConfig::preset("tiny", Variant::umamba), 5);
  EXPECT_THROW(net.forward(Tensor::zeros({1, 1, 48, 64})), DimensionError);
  EXPECT_THROW(net.forward(Tensor::zeros({1, 2, 64, 64})), DimensionError);
}

TEST(ModelConfigJson, RoundTripAndStrictKeys) {
  const auto cfg = ModelConfig::preset("endoscopy", Variant::dagger);
  const auto j = cfg.to_json();
  for (const char* k : {"variant", "stage_dims", "vss_depths", "d_state", "num_classes", "input_channels",
                        "input_size", "deep_supervision"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_EQ(ModelConfig::from_json(j).to_json(), j);
  auto bad = j;
  bad["stage_dim"] = 3;
  EXPECT_THROW(ModelConfig::from_json(bad), ConfigError);
  auto odd = j;
  odd["stage_dims"] = {48, 96, 200, 384, 768};
  EXPECT_THROW(ModelConfig::from_json(odd).validate(), ConfigError);
}

TEST(ModelConfigJson, PresetsMatchDatasets) {
  const auto a = ModelConfig::preset("abdomen_mri", Variant::umamba);
  EXPECT_EQ(a.num_classes, 14);
  EXPECT_EQ(a.input_channels, 1);
  EXPECT_EQ(a.stage_dims, (std::vector<std::int64_t>{48, 96, 192, 384, 768}));
  EXPECT_EQ(a.vss_depths, (std::vector<std::int64_t>{2, 2, 9, 2}));
  const auto e = ModelConfig::preset("endoscopy", Variant::umamba);
  EXPECT_EQ(e.input_h, 384);
  EXPECT_EQ(e.input_w, 640);
  EXPECT_EQ(ModelConfig::preset("microscopy", Variant::dagger).input_h, 512);
  EXPECT_THROW(ModelConfig::preset("retina", Variant::umamba), ConfigError);
  EXPECT_EQ(variant_from_name("dagger"), Variant::dagger);
  EXPECT_EQ(variant_name(Variant::dagger), "umamba_dagger");
}
