#include <gtest/gtest.h>

#include <cmath>

#include "swum/autograd.hpp"
#include "swum/gradcheck.hpp"
#include "swum/ntf.hpp"
#include "swum/ops.hpp"
#include "test_util.hpp"

using namespace swum;
using swum::testing::f64;
using swum::testing::rnd;

TEST(Conv2d, OnesKernelCentreSumsNine) {
  const Tensor y = conv2d(Tensor::ones({1, 1, 3, 3}, DType::f64), Tensor::ones({1, 1, 3, 3}, DType::f64), {}, {1, 1, 1});
  ASSERT_EQ(y.shape(), (Shape{1, 1, 3, 3}));
  EXPECT_EQ(y.at(4), 9.0);
  EXPECT_EQ(y.at(0), 4.0);
}

TEST(Conv2d, IdentityOneByOneKernel) {
  const Tensor x = rnd({1, 1, 4, 4}, 1);
  const Tensor y = conv2d(x, Tensor::ones({1, 1, 1, 1}, DType::f64));
  EXPECT_TRUE(identical(x, y));
}

TEST(Conv2d, OutputExtentFormula) {
  for (int stride : {1, 2, 3})
    for (int pad : {0, 1, 3}) {
      const Tensor y = conv2d(rnd({1, 2, 9, 7}, 2), rnd({3, 2, 3, 3}, 3), {}, {stride, pad, 1});
      EXPECT_EQ(y.dim(2), (9 + 2 * pad - 3) / stride + 1);
      EXPECT_EQ(y.dim(3), (7 + 2 * pad - 3) / stride + 1);
    }
}

TEST(Conv2d, ShapeErrorsNameTheAxis) {
  try {
    conv2d(rnd({1, 3, 4, 4}, 1), rnd({2, 2, 3, 3}, 2));
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("axis 1"), std::string::npos) << e.what();
  }
  EXPECT_THROW(conv2d(rnd({1, 3, 4, 4}, 1), rnd({2, 1, 3, 3}, 2), {}, {1, 0, 2}), DimensionError);
  EXPECT_THROW(conv2d(rnd({1, 1, 2, 2}, 1), rnd({1, 1, 3, 3}, 2)), DimensionError);
}

TEST(ConvTranspose2d, StrideTwoScattersOntoGrid) {
  const Tensor x = f64({1, 1, 2, 2}, {1, 2, 3, 4});
  const Tensor w = f64({1, 1, 2, 2}, {1, 0, 0, 0});
  const Tensor y = conv_transpose2d(x, w, {}, 2, 0);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 4, 4}));
  const std::vector<double> want = {1, 0, 2, 0, 0, 0, 0, 0, 3, 0, 4, 0, 0, 0, 0, 0};
  EXPECT_EQ(y.to_vector(), want);
}

TEST(ConvTranspose2d, AdjointOfConv2d) {
  struct Geo {
    int stride, pad, k, n;
  };
  for (Geo g : {Geo{1, 0, 3, 6}, Geo{2, 0, 2, 6}, Geo{2, 1, 3, 7}, Geo{1, 1, 3, 5}, Geo{2, 3, 7, 9}}) {
    const Tensor x = rnd({2, 3, g.n, g.n}, 10 + g.k), w = rnd({4, 3, g.k, g.k}, 20 + g.stride);
    const Tensor cx = conv2d(x, w, {}, {g.stride, g.pad, 1});
    const Tensor y = rnd(cx.shape(), 30 + g.pad);
    const Tensor ty = conv_transpose2d(y, w, {}, g.stride, g.pad);
    ASSERT_EQ(ty.shape(), x.shape());
    EXPECT_NEAR(inner_product(cx, y), inner_product(x, ty), 1e-10);
  }
}

TEST(Linear, IdentityAndBias) {
  const Tensor x = rnd({2, 3, 4}, 5);
  Tensor eye = Tensor::zeros({4, 4}, DType::f64);
  for (int i = 0; i < 4; ++i) eye.data<double>()[i * 5] = 1;
  EXPECT_TRUE(identical(linear(x, eye, Tensor::zeros({4}, DType::f64)), x));
  const Tensor b = f64({2}, {0.5, -2});
  const Tensor y = linear(Tensor::zeros({3, 4}, DType::f64), rnd({2, 4}, 6), b);
  for (int r = 0; r < 3; ++r) {
    EXPECT_EQ(y.at(2 * r), 0.5);
    EXPECT_EQ(y.at(2 * r + 1), -2.0);
  }
  EXPECT_THROW(linear(rnd({2, 3}, 1), rnd({2, 4}, 2)), DimensionError);
}

TEST(Norms, ConstantInputGivesZeros) {
  const Tensor ln = layer_norm(Tensor::full({3, 5}, 2.5, DType::f64), Tensor::ones({5}, DType::f64),
                               Tensor::zeros({5}, DType::f64));
  for (double v : ln.to_vector()) EXPECT_EQ(v, 0.0);
  const Tensor in = instance_norm2d(Tensor::full({2, 3, 4, 4}, -1.0, DType::f64), Tensor::ones({3}, DType::f64),
                                    Tensor::zeros({3}, DType::f64));
  for (double v : in.to_vector()) EXPECT_EQ(v, 0.0);
}

TEST(Norms, MomentsAreStandardised) {
  const Tensor x = rnd({4, 16}, 9, -3, 5);
  const Tensor y = layer_norm(x, Tensor::ones({16}, DType::f64), Tensor::zeros({16}, DType::f64));
  for (int r = 0; r < 4; ++r) {
    double m = 0, v = 0;
    for (int c = 0; c < 16; ++c) m += y.at(r * 16 + c) / 16;
    for (int c = 0; c < 16; ++c) v += std::pow(y.at(r * 16 + c) - m, 2) / 16;
    EXPECT_NEAR(m, 0, 1e-12);
    EXPECT_NEAR(v, 1, 1e-3);
  }
  const Tensor z = instance_norm2d(rnd({2, 3, 5, 5}, 8, 0, 4), Tensor::ones({3}, DType::f64),
                                   Tensor::zeros({3}, DType::f64));
  for (int g = 0; g < 6; ++g) {
    double m = 0, v = 0;
    for (int i = 0; i < 25; ++i) m += z.at(g * 25 + i) / 25;
    for (int i = 0; i < 25; ++i) v += std::pow(z.at(g * 25 + i) - m, 2) / 25;
    EXPECT_NEAR(m, 0, 1e-12);
    EXPECT_NEAR(v, 1, 1e-3);
  }
}

TEST(Norms, NonPositiveEpsRejected) {
  const Tensor x = rnd({2, 4}, 1), g = Tensor::ones({4}, DType::f64), b = Tensor::zeros({4}, DType::f64);
  EXPECT_THROW(layer_norm(x, g, b, 0.0), Error);
  EXPECT_THROW(layer_norm(x, g, b, -1e-5), Error);
}

TEST(Activations, ClosedForms) {
  EXPECT_EQ(silu(f64({1}, {0})).item(), 0.0);
  EXPECT_DOUBLE_EQ(leaky_relu(f64({1}, {-1}), 0.01).item(), -0.01);
  EXPECT_DOUBLE_EQ(softplus(f64({1}, {0})).item(), std::log(2.0));
  const Tensor s = softmax(Tensor::full({2, 5}, 3.0, DType::f64), -1);
  for (double v : s.to_vector()) EXPECT_DOUBLE_EQ(v, 0.2);
  const Tensor r = softmax(rnd({3, 4, 2}, 4, -5, 5), 1);
  for (int b = 0; b < 3; ++b)
    for (int j = 0; j < 2; ++j) {
      double t = 0;
      for (int k = 0; k < 4; ++k) t += r.at((b * 4 + k) * 2 + j);
      EXPECT_NEAR(t, 1, 1e-14);
    }
}

TEST(Backward, SumGivesOnes) {
  Tensor x = rnd({3, 4}, 1);
  x.set_requires_grad(true);
  backward(sum(x));
  for (double g : x.grad().to_vector()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, QuadraticGivesTwoX) {
  Tensor x = rnd({5}, 2);
  x.set_requires_grad(true);
  backward(sum(mul(x, x)));
  for (int i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(x.grad().at(i), 2 * x.at(i));
}

TEST(Backward, RepeatedCallsAccumulate) {
  Tensor x = rnd({4}, 3);
  x.set_requires_grad(true);
  const Tensor L = sum(mul(x, x));
  backward(L);
  backward(L);
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(x.grad().at(i), 4 * x.at(i));
  x.zero_grad();
  backward(L);
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(x.grad().at(i), 2 * x.at(i));
}

TEST(Backward, SharedInputsAccumulateAcrossBranches) {
  Tensor x = rnd({3}, 4);
  x.set_requires_grad(true);
  backward(sum(add(mul_scalar(x, 3), exp(x))));
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(x.grad().at(i), 3 + std::exp(x.at(i)), 1e-14);
}

TEST(Backward, NonScalarLossRejected) {
  Tensor x = rnd({3}, 1);
  x.set_requires_grad(true);
  EXPECT_THROW(backward(mul_scalar(x, 2)), DimensionError);
}

TEST(Backward, NoGradBuildsNoTape) {
  Tensor x = rnd({3}, 1);
  x.set_requires_grad(true);
  NoGradGuard ng;
  EXPECT_EQ(tape_size(exp(x)), 0u);
}

TEST(Gradcheck, EveryOpWithinTolerance) {
  for (const auto& r : run_op_suite(0)) {
    EXPECT_TRUE(r.passed()) << r.name << " rel err " << r.max_rel_err;
    EXPECT_LT(r.max_rel_err, 1e-4) << r.name;
  }
}

TEST(Gradcheck, SecondSeed) {
  for (const auto& r : run_op_suite(12345)) EXPECT_TRUE(r.passed()) << r.name << " rel err " << r.max_rel_err;
}

TEST(Determinism, OpsAreBitReproducible) {
  const Tensor x = rnd({2, 3, 8, 8}, 3), w = rnd({4, 3, 3, 3}, 4);
  EXPECT_TRUE(identical(conv2d(x, w, {}, {1, 1, 1}), conv2d(x, w, {}, {1, 1, 1})));
  const Tensor x32 = x.to(DType::f32), w32 = w.to(DType::f32);
  EXPECT_TRUE(identical(conv2d(x32, w32, {}, {2, 1, 1}), conv2d(x32, w32, {}, {2, 1, 1})));
}

TEST(Ntf, RoundTripAllDtypes) {
  for (DType dt : {DType::f32, DType::f64, DType::u8}) {
    Tensor t = rnd({2, 3, 5}, 7, 0, 200).to(dt);
    const std::string bytes = ntf::encode(t);
    EXPECT_EQ(bytes.substr(0, 4), "NTF1");
    EXPECT_EQ(static_cast<std::uint8_t>(bytes[4]), static_cast<std::uint8_t>(dt));
    EXPECT_EQ(static_cast<std::uint8_t>(bytes[5]), 3);
    EXPECT_EQ(bytes.size(), ntf::encoded_size(t.shape(), dt));
    EXPECT_TRUE(identical(ntf::decode(bytes), t));
  }
}

TEST(Ntf, LittleEndianHeader) {
  const std::string b = ntf::encode(Tensor::zeros({258}, DType::u8));
  EXPECT_EQ(static_cast<std::uint8_t>(b[6]), 2);
  EXPECT_EQ(static_cast<std::uint8_t>(b[7]), 1);
  EXPECT_EQ(b[8], 0);
  EXPECT_EQ(b[9], 0);
}

TEST(Ntf, TruncationIsAnIntegrityError) {
  const std::string b = ntf::encode(rnd({4, 4}, 1));
  EXPECT_THROW(ntf::decode(std::string_view(b).substr(0, b.size() - 1)), IntegrityError);
  EXPECT_THROW(ntf::decode(std::string_view(b).substr(0, 3)), IntegrityError);
  std::string bad = b;
  bad[0] = 'X';
  EXPECT_THROW(ntf::decode(bad), IntegrityError);
}
