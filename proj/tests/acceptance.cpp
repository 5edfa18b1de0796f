// Acceptance run: one PASS/FAIL line per criterion, exit status 1 on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <set>
#include <string>

#include "metric_oracles.hpp"
#include "swum/bench.hpp"
#include "swum/checkpoint.hpp"
#include "swum/cost.hpp"
#include "swum/gradcheck.hpp"
#include "swum/ops.hpp"
#include "swum/ssm.hpp"
#include "swum/train.hpp"

using namespace swum;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s  [%d] %-28s %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  failures += !ok;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. Parameter counts near the published sizes, and equal to the frozen baselines.
void check_params() {
  const std::int64_t u = count_params(ModelConfig::preset("abdomen_mri", Variant::umamba)).total_params;
  const std::int64_t d = count_params(ModelConfig::preset("abdomen_mri", Variant::dagger)).total_params;
  const bool near = std::abs(u / 60e6 - 1) <= 0.15 && std::abs(d / 28e6 - 1) <= 0.15;
  const bool frozen = u == 59'872'054 && d == 27'497'720;
  report(1, "parameter counts", near && frozen,
         fmt("umamba %lld (%+.1f%% vs 60M), dagger %lld (%+.1f%% vs 28M), tol 15%%, baselines %s", (long long)u,
             100 * (u / 60e6 - 1), (long long)d, 100 * (d / 28e6 - 1), frozen ? "exact" : "CHANGED"));
}

// 2. Multiply-accumulate counts at the three dataset resolutions.
void check_flops() {
  struct Row {
    const char* preset;
    std::int64_t h, w;
    double umamba, dagger;
  };
  const Row rows[] = {{"abdomen_mri", 320, 320, 68.0e9, 18.9e9},
                      {"endoscopy", 384, 640, 163.6e9, 45.3e9},
                      {"microscopy", 512, 512, 174.4e9, 48.2e9}};
  bool ok = true;
  std::string detail;
  for (const auto& r : rows) {
    const double u = static_cast<double>(count_flops(ModelConfig::preset(r.preset, Variant::umamba), r.h, r.w).flops);
    const double d = static_cast<double>(count_flops(ModelConfig::preset(r.preset, Variant::dagger), r.h, r.w).flops);
    ok = ok && std::abs(u / r.umamba - 1) <= 0.15 && std::abs(d / r.dagger - 1) <= 0.15;
    detail += fmt("%lldx%lld %.1fG(%+.1f%%)/%.1fG(%+.1f%%)  ", (long long)r.h, (long long)r.w, u / 1e9,
                  100 * (u / r.umamba - 1), d / 1e9, 100 * (d / r.dagger - 1));
  }
  report(2, "FLOPs", ok, detail + "tol 15%");
}

// 3. Parallel scan against the sequential scan in f64.
void check_scan() {
  std::mt19937_64 rng(2024);
  const std::int64_t lengths[] = {1, 2, 3, 7, 64, 257, 4096};
  double worst = 0;
  for (int c = 0; c < 50; ++c) {
    const std::int64_t L = lengths[c % 7];
    const std::int64_t d = 1 + static_cast<std::int64_t>(rng() % 4), N = 1 + static_cast<std::int64_t>(rng() % 4);
    ssm::S6Params p;
    p.d_inner = d, p.d_state = N, p.dt_rank = 1;
    p.A_log = rand_uniform({d, N}, rng, -1.0, 1.5);
    p.D_skip = rand_uniform({d}, rng);
    p.x_proj = rand_uniform({1 + 2 * N, d}, rng);
    p.dt_proj_weight = rand_uniform({d, 1}, rng);
    p.dt_proj_bias = rand_uniform({d}, rng);
    const Tensor x = rand_uniform({1 + static_cast<std::int64_t>(rng() % 2), L, d}, rng, -2, 2);
    worst = std::max(worst, max_abs_diff(ssm::s6_scan_sequential(x, p), ssm::s6_scan_parallel(x, p)));
  }
  report(3, "parallel scan", worst <= 1e-10, fmt("50 cases, L up to 4096, max |diff| %.2e, tol 1e-10", worst));
}

// 4. Analytic gradients against central differences.
void check_gradients() {
  double op_worst = 0;
  std::size_t n = 0;
  bool ok = true;
  for (const auto& r : run_op_suite(0)) {
    op_worst = std::max(op_worst, r.max_rel_err);
    ok = ok && r.passed() && r.tol <= 1e-4;
    ++n;
  }
  double net_worst = 0;
  for (Variant v : {Variant::umamba, Variant::dagger}) {
    const auto r = run_network_check(v, 0);
    net_worst = std::max(net_worst, r.max_rel_err);
    ok = ok && r.passed() && r.tol <= 1e-3;
  }
  report(4, "gradcheck", ok,
         fmt("%zu ops max rel err %.2e (tol 1e-4), tiny networks %.2e (tol 1e-3)", n, op_worst, net_worst));
}

// 5. Near-linear scan cost against quadratic attention.
void check_bench() {
  const BenchReport b = bench_scan(BenchOptions{});
  const double s6s = b.mean_ratio("s6_sequential"), s6p = b.mean_ratio("s6_parallel"), ss = b.mean_ratio("ss2d"),
               at = b.mean_ratio("attention");
  const bool ok = s6s < 2.5 && s6p < 2.5 && ss < 2.5 && at > 3.0;
  report(5, "linear scaling", ok,
         fmt("doubling ratio (geo mean, L 2^12..2^17) s6_seq %.2f s6_par %.2f ss2d %.2f (tol < 2.5); "
             "attention %.2f (> 3)",
             s6s, s6p, ss, at));
}

std::vector<SegSample> synthetic(int count, std::int64_t size) {
  GenOptions g;
  g.count = count;
  g.size = size;
  g.seed = 1;
  std::vector<SegSample> out;
  for (int i = 0; i < count; ++i) out.push_back(make_sample(g, i));
  return out;
}

// 6. Overfitting a small synthetic set with the tiny configuration.
void check_overfit() {
  const auto data = synthetic(16, 64);
  bool ok = true;
  std::string detail;
  for (Variant v : {Variant::umamba, Variant::dagger}) {
    const auto t0 = std::chrono::steady_clock::now();
    Network net(ModelConfig::preset("tiny", v), 0);
    TrainConfig tc;
    tc.epochs = 4, tc.iters_per_epoch = 50, tc.batch_size = 4, tc.base_lr = 1e-2, tc.freeze_epochs = 0;
    tc.eval_every = 0;
    train_loop(net, data, tc);
    const double dsc = evaluate(net, data).mean_dsc, secs = seconds_since(t0);
    ok = ok && dsc > 0.95 && secs < 600;
    detail += fmt("%s DSC %.4f in %.0fs  ", std::string(variant_name(v)).c_str(), dsc, secs);
  }
  report(6, "overfit 16 images", ok, detail + "(need > 0.95, < 600s, 200 iters)");
}

// 7. Selective initialization, the freeze window and divergence from scratch.
void check_pretraining() {
  const auto data = synthetic(4, 32);
  const ModelConfig cfg = ModelConfig::preset("tiny", Variant::umamba);
  const Checkpoint sur = make_surrogate_pretrained(cfg, 77);

  Network net(cfg, 5);
  const auto rep = selective_init(net, sur);
  std::set<std::string> want, got(rep.initialized.begin(), rep.initialized.end());
  for (const auto& [n, t] : net.params().items())
    if (is_pretrained_designated(n)) want.insert(n);
  const bool exact_set = got == want && !want.empty();

  std::map<std::string, Tensor> start;
  for (const auto& n : got) start[n] = net.params().get(n).clone();
  TrainConfig tc;
  tc.epochs = 11, tc.iters_per_epoch = 1, tc.freeze_epochs = 10, tc.base_lr = 1e-3, tc.eval_every = 0;
  std::vector<bool> same;
  const auto log_pre = train_loop(net, data, tc, got, [&](const EpochLog&) {
    bool s = true;
    for (const auto& n : got) s = s && identical(net.params().get(n), start[n]);
    same.push_back(s);
  });
  bool held = same.size() == 11;
  for (int e = 0; e < 10 && held; ++e) held = same[e];
  const bool released = same.size() == 11 && !same[10];

  Network scratch(cfg, 5);
  const auto log_scr = train_loop(scratch, data, tc);
  const bool diverge = serialize(checkpoint_of(scratch)) != serialize(checkpoint_of(net)) &&
                       log_scr.back().train_loss != log_pre.back().train_loss;
  report(7, "pretraining mechanics", exact_set && held && released && diverge,
         fmt("init set %zu/%zu exact=%s, frozen identical epochs 0-9=%s, changed at 10=%s, "
             "scratch diverges=%s (loss %.4f vs %.4f)",
             got.size(), want.size(), exact_set ? "yes" : "no", held ? "yes" : "no", released ? "yes" : "no", diverge ? "yes" : "no", log_pre.back().train_loss,
             log_scr.back().train_loss));
}

// 8. Metrics against brute force.
void check_metrics() {
  std::mt19937_64 rng(8);
  int mismatches = 0;
  for (int c = 0; c < 200; ++c) {
    const std::int64_t h = 1 + static_cast<std::int64_t>(rng() % 8), w = 1 + static_cast<std::int64_t>(rng() % 8);
    const int K = 2 + static_cast<int>(rng() % 2);
    const double dp = (rng() % 5) / 4.0, dg = (rng() % 5) / 4.0;
    const auto p = oracle::random_mask(rng, h, w, K, dp), g = oracle::random_mask(rng, h, w, K, dg);
    for (int k = 1; k < K; ++k) {
      mismatches += dsc(p, g, k) != oracle::dsc(p, g, k);
      mismatches += nsd(p, g, k, 2.0) != oracle::nsd(p, g, k, 2.0);
    }
    mismatches += instance_f1(connected_components(p, 1), connected_components(g, 1)) !=
                  oracle::instance_f1(oracle::components(p, 1), oracle::components(g, 1));
  }
  const LabelMap empty(5, 5);
  const bool both_empty = dsc(empty, empty, 1) == 1.0 && nsd(empty, empty, 1) == 1.0 && instance_f1(empty, empty) == 1.0;
  report(8, "metrics vs brute force", mismatches == 0 && both_empty,
         fmt("200 random masks up to 8x8: %d mismatches; both-empty gives 1: %s", mismatches,
             both_empty ? "yes" : "no"));
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::pair<const char*, void (*)()> checks[] = {
      {"parameter counts", check_params}, {"FLOPs", check_flops},         {"parallel scan", check_scan},
      {"gradcheck", check_gradients},     {"linear scaling", check_bench}, {"overfit", check_overfit},
      {"pretraining", check_pretraining}, {"metrics", check_metrics}};
  int id = 0;
  for (const auto& [name, fn] : checks) {
    ++id;
    try {
      fn();
    } catch (const std::exception& e) {
      report(id, name, false, std::string("threw: ") + e.what());
    }
  }
  std::printf("%d criteria failed, %.0fs\n", failures, seconds_since(t0));
  return failures ? 1 : 0;
}
