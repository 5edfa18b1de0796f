#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "swum/ops.hpp"
#include "swum/ssm.hpp"
#include "test_util.hpp"

using namespace swum;
using namespace swum::ssm;
using swum::testing::f64;
using swum::testing::rnd;

namespace {

S6Params random_params(std::int64_t d, std::int64_t N, std::int64_t r, std::uint64_t seed, DType dt = DType::f64) {
  S6Params p;
  p.d_inner = d, p.d_state = N, p.dt_rank = r;
  p.A_log = rnd({d, N}, seed, -1.0, 1.5).to(dt);
  p.D_skip = rnd({d}, seed + 1).to(dt);
  p.x_proj = rnd({r + 2 * N, d}, seed + 2).to(dt);
  p.dt_proj_weight = rnd({d, r}, seed + 3).to(dt);
  p.dt_proj_bias = rnd({d}, seed + 4).to(dt);
  return p;
}

double softplus_ref(double v) { return v > 20 ? v : std::log1p(std::exp(v)); }

// Straight loops over the recurrence, written independently of the library.
std::vector<double> naive_s6(const Tensor& x, const S6Params& p) {
  const std::int64_t B = x.dim(0), L = x.dim(1), d = p.d_inner, N = p.d_state, r = p.dt_rank;
  std::vector<double> y(static_cast<std::size_t>(B * L * d));
  for (std::int64_t b = 0; b < B; ++b) {
    std::vector<double> h(static_cast<std::size_t>(d * N), 0.0);
    for (std::int64_t t = 0; t < L; ++t) {
      std::vector<double> xt(d), proj(r + 2 * N, 0.0);
      for (std::int64_t c = 0; c < d; ++c) xt[c] = x.at((b * L + t) * d + c);
      for (std::int64_t o = 0; o < r + 2 * N; ++o)
        for (std::int64_t c = 0; c < d; ++c) proj[o] += p.x_proj.at(o * d + c) * xt[c];
      for (std::int64_t c = 0; c < d; ++c) {
        double pre = p.dt_proj_bias.at(c);
        for (std::int64_t k = 0; k < r; ++k) pre += p.dt_proj_weight.at(c * r + k) * proj[k];
        const double delta = softplus_ref(pre);
        double acc = 0;
        for (std::int64_t n = 0; n < N; ++n) {
          const double A = -std::exp(p.A_log.at(c * N + n));
          double& hh = h[c * N + n];
          hh = std::exp(delta * A) * hh + delta * proj[r + n] * xt[c];
          acc += proj[r + N + n] * hh;
        }
        y[(b * L + t) * d + c] = acc + p.D_skip.at(c) * xt[c];
      }
    }
  }
  return y;
}

std::int64_t naive_position(std::int64_t t, std::int64_t H, std::int64_t W, int v) {
  const std::int64_t n = H * W;
  switch (v) {
    case 1: return t;
    case 2: return (t % H) * W + t / H;
    case 3: return n - 1 - t;
    default: return naive_position(n - 1 - t, H, W, 2);
  }
}

Tensor naive_expand(const Tensor& z, int v) {
  const std::int64_t B = z.dim(0), d = z.dim(1), H = z.dim(2), W = z.dim(3);
  std::vector<double> out(static_cast<std::size_t>(B * H * W * d));
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t t = 0; t < H * W; ++t)
      for (std::int64_t c = 0; c < d; ++c)
        out[(b * H * W + t) * d + c] = z.at((b * d + c) * H * W + naive_position(t, H, W, v));
  return f64({B, H * W, d}, out);
}

double max_abs(const std::vector<double>& a, const Tensor& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b.at(static_cast<std::int64_t>(i))));
  return m;
}

}  // namespace

TEST(S6, ZeroInputGivesZero) {
  const auto p = random_params(3, 4, 1, 1);
  for (auto algo : {ScanAlgorithm::sequential, ScanAlgorithm::parallel})
    for (double v : s6_scan(Tensor::zeros({2, 9, 3}, DType::f64), p, algo).to_vector()) EXPECT_EQ(v, 0.0);
}

TEST(S6, SingleStepClosedForm) {
  const auto p = random_params(2, 3, 1, 5);
  const Tensor x = rnd({1, 1, 2}, 6);
  const Tensor y = s6_scan_sequential(x, p);
  for (std::int64_t c = 0; c < 2; ++c) {
    std::vector<double> proj(7, 0.0);
    for (int o = 0; o < 7; ++o)
      for (int k = 0; k < 2; ++k) proj[o] += p.x_proj.at(o * 2 + k) * x.at(k);
    const double delta = softplus_ref(p.dt_proj_weight.at(c) * proj[0] + p.dt_proj_bias.at(c));
    double want = p.D_skip.at(c) * x.at(c);
    for (int n = 0; n < 3; ++n) want += proj[4 + n] * delta * proj[1 + n] * x.at(c);
    EXPECT_NEAR(y.at(c), want, 1e-14);
  }
}

TEST(S6, MatchesNaiveLoopOracle) {
  const auto p = random_params(2, 2, 1, 11);
  const Tensor x = rnd({1, 4, 2}, 11);
  EXPECT_LT(max_abs(naive_s6(x, p), s6_scan_sequential(x, p)), 1e-12);
  EXPECT_LT(max_abs(naive_s6(x, p), s6_scan_parallel(x, p)), 1e-12);
}

TEST(S6, MatchesNaiveLoopOracleWider) {
  const auto p = random_params(20, 5, 2, 3);
  const Tensor x = rnd({2, 33, 20}, 4);
  EXPECT_LT(max_abs(naive_s6(x, p), s6_scan_sequential(x, p)), 1e-12);
}

TEST(S6, ParallelAgreesWithSequentialF64) {
  std::mt19937_64 rng(2024);
  const std::int64_t lengths[] = {1, 2, 3, 7, 64, 257, 4096};
  for (int c = 0; c < 50; ++c) {
    const std::int64_t L = lengths[c % 7];
    const std::int64_t d = 1 + static_cast<std::int64_t>(rng() % 4), N = 1 + static_cast<std::int64_t>(rng() % 4);
    const auto p = random_params(d, N, 1, rng());
    const Tensor x = rnd({1 + static_cast<std::int64_t>(rng() % 2), L, d}, rng(), -2, 2);
    const Tensor a = s6_scan_sequential(x, p), b = s6_scan_parallel(x, p);
    EXPECT_LE(max_abs_diff(a, b), 1e-10) << "case " << c << " L=" << L;
  }
}

TEST(S6, ParallelAgreesWithSequentialF32) {
  const auto p = random_params(4, 3, 1, 17, DType::f32);
  for (std::int64_t L : {1, 7, 257, 1000}) {
    const Tensor x = rnd({1, L, 4}, static_cast<std::uint64_t>(L)).to(DType::f32);
    const Tensor a = s6_scan_sequential(x, p), b = s6_scan_parallel(x, p);
    for (std::int64_t i = 0; i < a.numel(); ++i)
      EXPECT_LE(std::abs(a.at(i) - b.at(i)), 1e-4 * std::max(1.0, std::abs(a.at(i))));
  }
}

TEST(SelectiveScan, HomogeneousInInputWithFixedStep) {
  const Tensor u = rnd({2, 13, 3}, 1), delta = rnd({2, 13, 3}, 2, 0.1, 1.5), A = rnd({3, 4}, 3, -2, -0.1),
               Bm = rnd({2, 13, 4}, 4), Cm = rnd({2, 13, 4}, 5), D = rnd({3}, 6);
  for (auto algo : {ScanAlgorithm::sequential, ScanAlgorithm::parallel}) {
    const Tensor y = selective_scan(u, delta, A, Bm, Cm, D, algo);
    const Tensor y3 = selective_scan(mul_scalar(u, -3.5), delta, A, Bm, Cm, D, algo);
    for (std::int64_t i = 0; i < y.numel(); ++i) EXPECT_NEAR(y3.at(i), -3.5 * y.at(i), 1e-12);
  }
}

TEST(S6, NonFiniteInputIsNumericError) {
  const auto p = random_params(2, 2, 1, 1);
  Tensor x = rnd({1, 5, 2}, 2);
  x.data<double>()[3] = std::nan("");
  EXPECT_THROW(s6_scan_sequential(x, p), NumericError);
  x.data<double>()[3] = INFINITY;
  EXPECT_THROW(s6_scan_parallel(x, p), NumericError);
}

TEST(S6, EmptySequenceRejected) {
  const auto p = random_params(2, 2, 1, 1);
  EXPECT_THROW(s6_scan_sequential(Tensor::zeros({1, 0, 2}, DType::f64), p), Error);
}

TEST(S6, ParameterShapesValidated) {
  auto p = random_params(2, 2, 1, 1);
  p.x_proj = rnd({4, 2}, 1);
  EXPECT_THROW(p.validate(), Error);
  EXPECT_EQ(default_dt_rank(96), 6);
  EXPECT_EQ(default_dt_rank(8), 1);
  EXPECT_EQ(default_dt_rank(17), 2);
}

TEST(Expand, TwoByTwoOrderings) {
  // patches a, b / c, d
  const Tensor z = f64({1, 1, 2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(expand(z, ScanDirection::row_major).to_vector(), (std::vector<double>{1, 2, 3, 4}));
  EXPECT_EQ(expand(z, ScanDirection::col_major).to_vector(), (std::vector<double>{1, 3, 2, 4}));
  EXPECT_EQ(expand(z, ScanDirection::row_major_rev).to_vector(), (std::vector<double>{4, 3, 2, 1}));
  EXPECT_EQ(expand(z, ScanDirection::col_major_rev).to_vector(), (std::vector<double>{4, 2, 3, 1}));
}

TEST(Expand, SinglePatchSameForAllDirections) {
  const Tensor z = rnd({2, 3, 1, 1}, 4);
  for (auto v : kAllDirections) EXPECT_TRUE(identical(expand(z, v), expand(z, ScanDirection::row_major)));
}

TEST(Expand, MatchesIndependentPermutation) {
  const Tensor z = rnd({2, 3, 4, 5}, 8);
  for (int v = 1; v <= 4; ++v) EXPECT_TRUE(identical(expand(z, static_cast<ScanDirection>(v)), naive_expand(z, v)));
}

TEST(Expand, InverseRecoversInputBitExactly) {
  std::mt19937_64 rng(5);
  for (int c = 0; c < 20; ++c) {
    const std::int64_t H = 1 + rng() % 7, W = 1 + rng() % 7, d = 1 + rng() % 3;
    const Tensor z = rnd({2, d, H, W}, rng());
    for (auto v : kAllDirections) {
      const Tensor s = expand(z, v);
      const auto order = scan_order(H, W, v);
      std::vector<double> back(static_cast<std::size_t>(z.numel()));
      for (std::int64_t b = 0; b < 2; ++b)
        for (std::int64_t t = 0; t < H * W; ++t)
          for (std::int64_t k = 0; k < d; ++k) back[(b * d + k) * H * W + order[t]] = s.at((b * H * W + t) * d + k);
      EXPECT_TRUE(identical(f64(z.shape(), back), z));
    }
  }
}

TEST(ScanOrder, BijectiveAndReversedExhaustively) {
  for (std::int64_t H = 1; H <= 8; ++H)
    for (std::int64_t W = 1; W <= 8; ++W) {
      for (auto v : kAllDirections) {
        auto o = scan_order(H, W, v);
        std::sort(o.begin(), o.end());
        std::vector<std::int64_t> id(static_cast<std::size_t>(H * W));
        std::iota(id.begin(), id.end(), 0);
        EXPECT_EQ(o, id);
      }
      auto r1 = scan_order(H, W, ScanDirection::row_major), r2 = scan_order(H, W, ScanDirection::col_major);
      std::reverse(r1.begin(), r1.end());
      std::reverse(r2.begin(), r2.end());
      EXPECT_EQ(r1, scan_order(H, W, ScanDirection::row_major_rev));
      EXPECT_EQ(r2, scan_order(H, W, ScanDirection::col_major_rev));
    }
}

TEST(Merge, IdentityScanGivesFourTimesInput) {
  const Tensor z = rnd({2, 3, 4, 5}, 9);
  const Tensor m = merge({expand(z, ScanDirection::row_major), expand(z, ScanDirection::col_major),
                          expand(z, ScanDirection::row_major_rev), expand(z, ScanDirection::col_major_rev)},
                         4, 5);
  ASSERT_EQ(m.shape(), z.shape());
  for (std::int64_t i = 0; i < z.numel(); ++i) EXPECT_EQ(m.at(i), 4 * z.at(i));
}

TEST(Merge, SingleNonZeroInputIsInversePermutation) {
  const Tensor z = rnd({1, 2, 3, 4}, 10);
  for (int k = 0; k < 4; ++k) {
    std::array<Tensor, 4> ys;
    for (int v = 0; v < 4; ++v)
      ys[v] = v == k ? expand(z, kAllDirections[v]) : Tensor::zeros({1, 12, 2}, DType::f64);
    EXPECT_TRUE(identical(merge(ys, 3, 4), z));
  }
}

TEST(Merge, Linear) {
  std::array<Tensor, 4> u, w, c;
  for (int v = 0; v < 4; ++v) {
    u[v] = rnd({2, 6, 3}, 20 + v);
    w[v] = rnd({2, 6, 3}, 30 + v);
    c[v] = add(mul_scalar(u[v], 0.3), mul_scalar(w[v], -1.7));
  }
  const Tensor lhs = merge(c, 2, 3);
  const Tensor rhs = add(mul_scalar(merge(u, 2, 3), 0.3), mul_scalar(merge(w, 2, 3), -1.7));
  EXPECT_LT(max_abs_diff(lhs, rhs), 1e-14);
}

TEST(Merge, ShapeMismatchRejected) {
  EXPECT_THROW(merge({rnd({1, 6, 2}, 1), rnd({1, 6, 2}, 2), rnd({1, 6, 3}, 3), rnd({1, 6, 2}, 4)}, 2, 3), Error);
  EXPECT_THROW(merge({rnd({1, 6, 2}, 1), rnd({1, 6, 2}, 2), rnd({1, 6, 2}, 3), rnd({1, 6, 2}, 4)}, 2, 2), Error);
}

namespace {
Ss2dParams random_ss2d(std::int64_t d, std::int64_t N, std::uint64_t seed) {
  Ss2dParams p;
  for (int v = 0; v < 4; ++v) p.dirs[v] = random_params(d, N, 1, seed + 10 * v);
  return p;
}
}  // namespace

TEST(Ss2d, ZeroInputGivesZero) {
  for (double v : ss2d(Tensor::zeros({1, 2, 3, 3}, DType::f64), random_ss2d(2, 2, 1)).to_vector()) EXPECT_EQ(v, 0.0);
}

TEST(Ss2d, SinglePixelIsSumOfFourSingleSteps) {
  const auto p = random_ss2d(3, 2, 4);
  const Tensor z = rnd({2, 3, 1, 1}, 5);
  const Tensor y = ss2d(z, p);
  const Tensor x = reshape(z, {2, 1, 3});
  std::vector<double> want(6, 0.0);
  for (int v = 0; v < 4; ++v) {
    const Tensor s = s6_scan_sequential(x, p.dirs[v]);
    for (int i = 0; i < 6; ++i) want[i] += s.at(i);
  }
  EXPECT_LT(max_abs(want, y), 1e-14);
}

TEST(Ss2d, MatchesIndependentComposition) {
  const auto p = random_ss2d(2, 2, 13);
  const Tensor z = rnd({1, 2, 3, 3}, 13);
  std::vector<double> want(18, 0.0);
  for (int v = 1; v <= 4; ++v) {
    const auto seq = naive_s6(naive_expand(z, v), p.dirs[v - 1]);
    for (std::int64_t t = 0; t < 9; ++t)
      for (int c = 0; c < 2; ++c) want[c * 9 + naive_position(t, 3, 3, v)] += seq[t * 2 + c];
  }
  EXPECT_LT(max_abs(want, ss2d(z, p)), 1e-12);
  EXPECT_LT(max_abs(want, ss2d(z, p, ScanAlgorithm::parallel)), 1e-12);
}

TEST(Ss2d, ParamsMustShareWidths) {
  auto p = random_ss2d(2, 2, 1);
  p.dirs[2] = random_params(2, 3, 1, 99);
  EXPECT_THROW(ss2d(rnd({1, 2, 2, 2}, 1), p), Error);
}
