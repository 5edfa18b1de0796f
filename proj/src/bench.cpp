#include "swum/bench.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "swum/autograd.hpp"
#include "swum/layers.hpp"
#include "swum/ssm.hpp"

namespace swum {

namespace {

template <class F>
double time_min(int reps, F&& f) {
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(reps, 1); ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

Tensor randn(Shape s, std::mt19937& rng, double scale) {
  std::normal_distribution<float> N(0.f, 1.f);
  Tensor t = Tensor::zeros(std::move(s), DType::f32);
  for (auto& v : t.data<float>()) v = static_cast<float>(scale) * N(rng);
  return t;
}

// softmax(Q K^T / sqrt(d)) V, 256 query rows at a time.
void attention(const Eigen::MatrixXf& Q, const Eigen::MatrixXf& K, const Eigen::MatrixXf& V, Eigen::MatrixXf& out) {
  const Eigen::Index L = Q.rows(), blk = 256;
  const float scale = 1.0f / std::sqrt(static_cast<float>(Q.cols()));
  out.resize(L, V.cols());
  Eigen::MatrixXf S;
  for (Eigen::Index r0 = 0; r0 < L; r0 += blk) {
    const Eigen::Index n = std::min(blk, L - r0);
    S.noalias() = (Q.middleRows(r0, n) * K.transpose()) * scale;
    for (Eigen::Index i = 0; i < n; ++i) {
      const float m = S.row(i).maxCoeff();
      S.row(i) = (S.row(i).array() - m).exp();
      S.row(i) /= S.row(i).sum();
    }
    out.middleRows(r0, n).noalias() = S * V;
  }
}

}  // namespace

double BenchReport::max_ratio(const std::string& method) const {
  double m = 0;
  for (const auto& r : rows)
    if (r.method == method) m = std::max(m, r.ratio);
  return m;
}

double BenchReport::mean_ratio(const std::string& method) const {
  const BenchRow* first = nullptr;
  const BenchRow* last = nullptr;
  int n = 0;
  for (const auto& r : rows)
    if (r.method == method) {
      if (!first) first = &r;
      last = &r, ++n;
    }
  if (n < 2) return 0;
  return std::pow(last->seconds / first->seconds, 1.0 / (n - 1));
}

std::string BenchReport::table() const {
  std::string out = "method          L         seconds     ratio\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-14s %-9lld %-11.5f %s\n", r.method.c_str(), static_cast<long long>(r.length),
                  r.seconds, r.ratio > 0 ? std::to_string(r.ratio).substr(0, 5).c_str() : "-");
    out += buf;
  }
  return out;
}

nlohmann::json BenchReport::to_json() const {
  nlohmann::json j;
  j["options"] = {{"min_log2", options.min_log2},     {"max_log2", options.max_log2}, {"lengths", options.lengths},
                  {"attention_max_log2", options.attention_max_log2},
                  {"d_inner", options.d_inner},       {"d_state", options.d_state},
                  {"reps", options.reps}};
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows)
    j["rows"].push_back({{"method", r.method}, {"length", r.length}, {"seconds", r.seconds}, {"ratio", r.ratio}});
  return j;
}

BenchReport bench_scan(const BenchOptions& opt) {
  std::vector<std::int64_t> Ls = opt.lengths;
  if (Ls.empty()) {
    if (opt.min_log2 < 0 || opt.max_log2 < opt.min_log2 || opt.max_log2 > 24)
      throw ConfigError("bench range must satisfy 0 <= min_log2 <= max_log2 <= 24");
    for (int k = opt.min_log2; k <= opt.max_log2; ++k) Ls.push_back(std::int64_t{1} << k);
  }
  for (auto L : Ls)
    if (L < 1 || L > (std::int64_t{1} << 24)) throw ConfigError("bench lengths must be in [1, 2^24]");
  if (opt.d_inner < 1 || opt.d_state < 1) throw ConfigError("bench widths must be >= 1");
  NoGradGuard ng;
  std::mt19937 rng(static_cast<std::uint32_t>(child_seed(opt.seed, "bench")));
  const std::int64_t d = opt.d_inner, N = opt.d_state, r = (d + 15) / 16;

  auto make_params = [&] {
    ssm::S6Params p;
    p.d_inner = d, p.d_state = N, p.dt_rank = r;
    p.A_log = Tensor::zeros({d, N}, DType::f32);
    for (std::int64_t i = 0; i < d; ++i)
      for (std::int64_t n = 0; n < N; ++n) p.A_log.data<float>()[i * N + n] = std::log(static_cast<float>(n + 1));
    p.D_skip = Tensor::full({d}, 1.0, DType::f32);
    p.x_proj = randn({r + 2 * N, d}, rng, 0.02);
    p.dt_proj_weight = randn({d, r}, rng, 0.1);
    p.dt_proj_bias = randn({d}, rng, 0.1);
    return p;
  };
  const ssm::S6Params p = make_params();
  ssm::Ss2dParams p4{{make_params(), make_params(), make_params(), make_params()}};

  BenchReport rep;
  rep.options = opt;
  auto push = [&](const std::string& method, std::int64_t L, double s) {
    double ratio = 0;
    if (!rep.rows.empty() && rep.rows.back().method == method) ratio = s / rep.rows.back().seconds;
    rep.rows.push_back({method, L, s, ratio});
  };

  for (auto algo : {ssm::ScanAlgorithm::sequential, ssm::ScanAlgorithm::parallel}) {
    const std::string name = algo == ssm::ScanAlgorithm::sequential ? "s6_sequential" : "s6_parallel";
    for (auto L : Ls) {
      const Tensor x = randn({1, L, d}, rng, 1.0);
      push(name, L, time_min(opt.reps, [&] { (void)ssm::s6_scan(x, p, algo); }));
    }
  }
  for (auto L : Ls) {
    // Most nearly square H x W with H * W = L and H a power of two.
    std::int64_t H = 1;
    while (L % (2 * H) == 0 && 2 * H * 2 * H <= L) H *= 2;
    const Tensor z = randn({1, d, H, L / H}, rng, 1.0);
    push("ss2d", L, time_min(opt.reps, [&] { (void)ssm::ss2d(z, p4); }));
  }
  const std::int64_t cap = std::int64_t{1} << opt.attention_max_log2;
  for (auto L : Ls) {
    if (L > cap) continue;
    const Eigen::MatrixXf Q = Eigen::MatrixXf::Random(L, d), K = Eigen::MatrixXf::Random(L, d),
                          V = Eigen::MatrixXf::Random(L, d);
    Eigen::MatrixXf out;
    push("attention", L, time_min(opt.reps, [&] { attention(Q, K, V, out); }));
  }
  return rep;
}

}  // namespace swum
