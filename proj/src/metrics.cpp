#include "swum/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <tuple>

namespace swum {

LabelMap LabelMap::from_tensor(const Tensor& t) {
  if (t.ndim() != 2) throw DimensionError("label map must be [H,W], got " + shape_str(t.shape()));
  LabelMap m(t.dim(0), t.dim(1));
  for (std::int64_t i = 0; i < t.numel(); ++i) m.data[i] = static_cast<std::int32_t>(t.at(i));
  return m;
}

namespace {

void require_same(const LabelMap& a, const LabelMap& b, const char* what) {
  if (a.h != b.h || a.w != b.w)
    throw DimensionError(std::string(what) + ": masks differ in size (" + std::to_string(a.h) + "x" +
                         std::to_string(a.w) + " vs " + std::to_string(b.h) + "x" + std::to_string(b.w) + ")");
}

constexpr double kFar = 1e20;

// Felzenszwalb-Huttenlocher lower envelope of parabolas over one line.
void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::int64_t n) {
  std::vector<std::int64_t> v(n);
  std::vector<double> z(n + 1);
  auto meet = [&](std::int64_t q, std::int64_t p) {
    return ((f[q] + double(q * q)) - (f[p] + double(p * p))) / (2.0 * double(q - p));
  };
  std::int64_t k = 0;
  v[0] = 0;
  z[0] = -INFINITY;
  z[1] = INFINITY;
  for (std::int64_t q = 1; q < n; ++q) {
    double s = meet(q, v[k]);
    while (s <= z[k]) s = meet(q, v[--k]);
    v[++k] = q;
    z[k] = s;
    z[k + 1] = INFINITY;
  }
  k = 0;
  for (std::int64_t q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = double(q - v[k]);
    d[q] = dq * dq + f[v[k]];
  }
}

// Squared Euclidean distance from every pixel to the nearest seed pixel.
std::vector<double> squared_distance_to(const std::vector<std::pair<std::int64_t, std::int64_t>>& seeds,
                                        std::int64_t h, std::int64_t w) {
  std::vector<double> g(static_cast<std::size_t>(h * w), kFar);
  for (auto [i, j] : seeds) g[i * w + j] = 0;
  std::vector<double> f(std::max(h, w)), d(std::max(h, w));
  for (std::int64_t j = 0; j < w; ++j) {
    for (std::int64_t i = 0; i < h; ++i) f[i] = g[i * w + j];
    edt_1d(f, d, h);
    for (std::int64_t i = 0; i < h; ++i) g[i * w + j] = d[i];
  }
  for (std::int64_t i = 0; i < h; ++i) {
    for (std::int64_t j = 0; j < w; ++j) f[j] = g[i * w + j];
    edt_1d(f, d, w);
    for (std::int64_t j = 0; j < w; ++j) g[i * w + j] = d[j];
  }
  return g;
}

}  // namespace

double dsc(const LabelMap& pred, const LabelMap& gt, int k) {
  require_same(pred, gt, "dsc");
  std::int64_t p = 0, g = 0, both = 0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const bool a = pred.data[i] == k, b = gt.data[i] == k;
    p += a;
    g += b;
    both += a && b;
  }
  if (p + g == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(p + g);
}

std::vector<std::pair<std::int64_t, std::int64_t>> boundary_pixels(const LabelMap& m, int k) {
  std::vector<std::pair<std::int64_t, std::int64_t>> out;
  auto inside = [&](std::int64_t i, std::int64_t j) { return i >= 0 && j >= 0 && i < m.h && j < m.w && m.at(i, j) == k; };
  for (std::int64_t i = 0; i < m.h; ++i)
    for (std::int64_t j = 0; j < m.w; ++j)
      if (inside(i, j) && !(inside(i - 1, j) && inside(i + 1, j) && inside(i, j - 1) && inside(i, j + 1)))
        out.emplace_back(i, j);
  return out;
}

double nsd(const LabelMap& pred, const LabelMap& gt, int k, double tau) {
  require_same(pred, gt, "nsd");
  if (!(tau > 0)) throw ConfigError("nsd tolerance must be > 0");
  const auto bp = boundary_pixels(pred, k), bg = boundary_pixels(gt, k);
  if (bp.empty() && bg.empty()) return 1.0;
  if (bp.empty() || bg.empty()) return 0.0;
  const double t2 = tau * tau;
  const auto dp = squared_distance_to(bp, pred.h, pred.w);
  const auto dg = squared_distance_to(bg, pred.h, pred.w);
  std::int64_t ok = 0;
  for (auto [i, j] : bp) ok += dg[i * pred.w + j] <= t2;
  for (auto [i, j] : bg) ok += dp[i * pred.w + j] <= t2;
  return static_cast<double>(ok) / static_cast<double>(bp.size() + bg.size());
}

LabelMap connected_components(const LabelMap& m, int k) {
  LabelMap out(m.h, m.w);
  std::int32_t next = 0;
  std::vector<std::int64_t> stack;
  for (std::int64_t s = 0; s < m.h * m.w; ++s) {
    if (m.data[s] != k || out.data[s]) continue;
    out.data[s] = ++next;
    stack.push_back(s);
    while (!stack.empty()) {
      const auto p = stack.back();
      stack.pop_back();
      const std::int64_t i = p / m.w, j = p % m.w;
      const std::int64_t nb[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
      for (auto& n : nb) {
        if (n[0] < 0 || n[1] < 0 || n[0] >= m.h || n[1] >= m.w) continue;
        const auto q = n[0] * m.w + n[1];
        if (m.data[q] == k && !out.data[q]) {
          out.data[q] = next;
          stack.push_back(q);
        }
      }
    }
  }
  return out;
}

double instance_f1(const LabelMap& pred, const LabelMap& gt, double iou_thresh) {
  require_same(pred, gt, "instance_f1");
  std::map<std::int32_t, std::int64_t> area_p, area_g;
  std::map<std::pair<std::int32_t, std::int32_t>, std::int64_t> overlap;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const auto a = pred.data[i], b = gt.data[i];
    if (a > 0) ++area_p[a];
    if (b > 0) ++area_g[b];
    if (a > 0 && b > 0) ++overlap[{a, b}];
  }
  const auto np = static_cast<std::int64_t>(area_p.size()), ng = static_cast<std::int64_t>(area_g.size());
  if (np == 0 && ng == 0) return 1.0;
  std::vector<std::tuple<double, std::int32_t, std::int32_t>> cand;
  for (const auto& [key, inter] : overlap) {
    const double iou = static_cast<double>(inter) /
                       static_cast<double>(area_p[key.first] + area_g[key.second] - inter);
    if (iou >= iou_thresh) cand.emplace_back(iou, key.first, key.second);
  }
  std::sort(cand.begin(), cand.end(), [](const auto& x, const auto& y) {
    if (std::get<0>(x) != std::get<0>(y)) return std::get<0>(x) > std::get<0>(y);
    return std::make_pair(std::get<1>(x), std::get<2>(x)) < std::make_pair(std::get<1>(y), std::get<2>(y));
  });
  std::map<std::int32_t, bool> used_p, used_g;
  std::int64_t tp = 0;
  for (const auto& [iou, a, b] : cand) {
    if (used_p[a] || used_g[b]) continue;
    used_p[a] = used_g[b] = true;
    ++tp;
  }
  return 2.0 * static_cast<double>(tp) / static_cast<double>(np + ng);
}

std::vector<LabelMap> argmax_labels(const Tensor& logits) {
  if (logits.ndim() != 4) throw DimensionError("argmax_labels: expected [B,K,H,W], got " + shape_str(logits.shape()));
  const std::int64_t B = logits.dim(0), K = logits.dim(1), H = logits.dim(2), W = logits.dim(3), P = H * W;
  std::vector<LabelMap> out;
  dispatch_float(logits.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const auto z = logits.data<T>();
    for (std::int64_t b = 0; b < B; ++b) {
      LabelMap m(H, W);
      for (std::int64_t i = 0; i < P; ++i) {
        std::int32_t best = 0;
        for (std::int64_t k = 1; k < K; ++k)
          if (z[(b * K + k) * P + i] > z[(b * K + best) * P + i]) best = static_cast<std::int32_t>(k);
        m.data[i] = best;
      }
      out.push_back(std::move(m));
    }
  });
  return out;
}

MetricAccumulator::MetricAccumulator(int num_classes, double tau, bool instance_mode)
    : K_(num_classes), tau_(tau), instance_(instance_mode), dsc_sum_(num_classes, 0.0), nsd_sum_(num_classes, 0.0) {}

void MetricAccumulator::add(const LabelMap& pred, const LabelMap& gt) {
  for (int k = 1; k < K_; ++k) {
    dsc_sum_[k] += dsc(pred, gt, k);
    nsd_sum_[k] += nsd(pred, gt, k, tau_);
  }
  // Instances are the 4-connected components of class 1.
  if (instance_) f1_sum_ += instance_f1(connected_components(pred, 1), connected_components(gt, 1));
  ++n_;
}

MetricReport MetricAccumulator::report() const {
  MetricReport r;
  r.num_classes = K_;
  r.samples = n_;
  r.dsc.assign(K_, 0.0);
  r.nsd.assign(K_, 0.0);
  if (n_ == 0) return r;
  for (int k = 1; k < K_; ++k) {
    r.dsc[k] = dsc_sum_[k] / static_cast<double>(n_);
    r.nsd[k] = nsd_sum_[k] / static_cast<double>(n_);
    r.mean_dsc += r.dsc[k];
    r.mean_nsd += r.nsd[k];
  }
  if (K_ > 1) {
    r.mean_dsc /= K_ - 1;
    r.mean_nsd /= K_ - 1;
  } else {
    r.mean_dsc = r.mean_nsd = 1.0;
  }
  if (instance_) r.f1 = f1_sum_ / static_cast<double>(n_);
  return r;
}

std::string MetricReport::table() const {
  std::string out;
  char line[128];
  std::snprintf(line, sizeof line, "%-8s %8s %8s\n", "class", "DSC", "NSD");
  out += line;
  for (int k = 1; k < num_classes; ++k) {
    std::snprintf(line, sizeof line, "%-8d %8.4f %8.4f\n", k, dsc[k], nsd[k]);
    out += line;
  }
  std::snprintf(line, sizeof line, "%-8s %8.4f %8.4f\n", "mean", mean_dsc, mean_nsd);
  out += line;
  if (f1) {
    std::snprintf(line, sizeof line, "instance F1 %.4f\n", *f1);
    out += line;
  }
  std::snprintf(line, sizeof line, "samples %zu\n", samples);
  out += line;
  return out;
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json j = {{"num_classes", num_classes}, {"mean_dsc", mean_dsc}, {"mean_nsd", mean_nsd}, {"samples", samples}};
  j["dsc"] = std::vector<double>(dsc.begin() + (dsc.empty() ? 0 : 1), dsc.end());
  j["nsd"] = std::vector<double>(nsd.begin() + (nsd.empty() ? 0 : 1), nsd.end());
  if (f1) j["f1"] = *f1;
  return j;
}

}  // namespace swum
