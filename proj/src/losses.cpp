#include "swum/losses.hpp"

#include <cmath>
#include <numeric>

#include "swum/autograd.hpp"
#include "swum/ops.hpp"

namespace swum {

namespace {

constexpr double kSmooth = 1e-5;

struct DiceCeState {
  std::int64_t B, K, P;  // P = pixels per image
  std::vector<double> prob;  // [B,K,P]
  std::vector<double> inter, psum, gsum;  // per class
  std::vector<int> present;  // foreground classes in the target
  double ce = 0;
  double dice_term = 0;
};

DiceCeState evaluate(const Tensor& logits, const Tensor& target) {
  if (logits.ndim() != 4) throw DimensionError("dice_ce_loss: logits must be [B,K,h,w], got " + shape_str(logits.shape()));
  if (target.dtype() != DType::u8) throw DimensionError("dice_ce_loss: target must be u8 labels");
  const Shape want{logits.dim(0), logits.dim(2), logits.dim(3)};
  if (target.shape() != want)
    throw DimensionError("dice_ce_loss: target " + shape_str(target.shape()) + " does not match logits " +
                         shape_str(logits.shape()) + " (expected " + shape_str(want) + ")");
  DiceCeState s;
  s.B = logits.dim(0);
  s.K = logits.dim(1);
  s.P = logits.dim(2) * logits.dim(3);
  const auto tg = target.data<std::uint8_t>();
  for (auto v : tg)
    if (v >= s.K)
      throw DataError("label " + std::to_string(v) + " out of range for " + std::to_string(s.K) + " classes");
  s.prob.assign(static_cast<std::size_t>(s.B * s.K * s.P), 0.0);
  s.inter.assign(s.K, 0.0);
  s.psum.assign(s.K, 0.0);
  s.gsum.assign(s.K, 0.0);
  double ce = 0;
  dispatch_float(logits.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const auto z = logits.data<T>();
    for (std::int64_t b = 0; b < s.B; ++b)
      for (std::int64_t i = 0; i < s.P; ++i) {
        double mx = -INFINITY;
        for (std::int64_t k = 0; k < s.K; ++k) mx = std::max(mx, static_cast<double>(z[(b * s.K + k) * s.P + i]));
        double den = 0;
        for (std::int64_t k = 0; k < s.K; ++k) den += std::exp(z[(b * s.K + k) * s.P + i] - mx);
        const int t = tg[b * s.P + i];
        ce += std::log(den) - (z[(b * s.K + t) * s.P + i] - mx);
        for (std::int64_t k = 0; k < s.K; ++k) {
          const double p = std::exp(z[(b * s.K + k) * s.P + i] - mx) / den;
          s.prob[(b * s.K + k) * s.P + i] = p;
          s.psum[k] += p;
          if (k == t) {
            s.inter[k] += p;
            s.gsum[k] += 1;
          }
        }
      }
  });
  s.ce = ce / static_cast<double>(s.B * s.P);
  for (int k = 1; k < s.K; ++k)
    if (s.gsum[k] > 0) s.present.push_back(k);
  if (!s.present.empty()) {
    double acc = 0;
    for (int k : s.present) acc += (2 * s.inter[k] + kSmooth) / (s.psum[k] + s.gsum[k] + kSmooth);
    s.dice_term = 1.0 - acc / static_cast<double>(s.present.size());
  }
  return s;
}

}  // namespace

DiceCeParts dice_ce_parts(const Tensor& logits, const Tensor& target) {
  const auto s = evaluate(logits, target);
  return {s.dice_term, s.ce};
}

Tensor dice_ce_loss(const Tensor& logits, const Tensor& target) {
  auto st = std::make_shared<DiceCeState>(evaluate(logits, target));
  Tensor out = Tensor::full({1}, st->dice_term + st->ce, logits.dtype());
  return record(out, "dice_ce_loss", {logits}, [st, target](const Tensor& o, const Tensor& g) {
    const auto& s = *st;
    const double go = g.at(0);
    const auto tg = target.data<std::uint8_t>();
    const double m = static_cast<double>(s.present.size());
    const double inv_n = 1.0 / static_cast<double>(s.B * s.P);
    // d(dice term)/dp_k for present classes, split into a per-pixel part
    // (times g) and a constant part.
    std::vector<double> a(s.K, 0.0), c(s.K, 0.0);
    for (int k : s.present) {
      const double den = s.psum[k] + s.gsum[k] + kSmooth;
      a[k] = -(2.0 / den) / m;
      c[k] = ((2 * s.inter[k] + kSmooth) / (den * den)) / m;
    }
    Tensor grad = Tensor::zeros({s.B, s.K, target.dim(1), target.dim(2)}, o.dtype());
    std::vector<double> gp(s.K);
    dispatch_float(o.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto gz = grad.data<T>();
      for (std::int64_t b = 0; b < s.B; ++b)
        for (std::int64_t i = 0; i < s.P; ++i) {
          const int t = tg[b * s.P + i];
          double dot = 0;
          for (std::int64_t k = 0; k < s.K; ++k) {
            gp[k] = (k == t ? a[k] : 0.0) + c[k];
            dot += s.prob[(b * s.K + k) * s.P + i] * gp[k];
          }
          for (std::int64_t k = 0; k < s.K; ++k) {
            const double p = s.prob[(b * s.K + k) * s.P + i];
            const double d = p * (gp[k] - dot) + (p - (k == t ? 1.0 : 0.0)) * inv_n;
            gz[(b * s.K + k) * s.P + i] = static_cast<T>(go * d);
          }
        }
    });
    return std::vector<Tensor>{grad};
  });
}

Tensor downsample_labels(const Tensor& target, std::int64_t h, std::int64_t w) {
  if (target.ndim() != 3 || target.dtype() != DType::u8)
    throw DimensionError("downsample_labels: target must be u8 [B,H,W], got " + shape_str(target.shape()));
  const std::int64_t B = target.dim(0), H = target.dim(1), W = target.dim(2);
  if (h < 1 || w < 1 || H % h || W % w)
    throw DimensionError("downsample_labels: " + std::to_string(H) + "x" + std::to_string(W) +
                         " is not an integer multiple of " + std::to_string(h) + "x" + std::to_string(w));
  if (h == H && w == W) return target;
  const std::int64_t sy = H / h, sx = W / w;
  Tensor out = Tensor::zeros({B, h, w}, DType::u8);
  const auto src = target.data<std::uint8_t>();
  auto dst = out.data<std::uint8_t>();
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t i = 0; i < h; ++i)
      for (std::int64_t j = 0; j < w; ++j)
        dst[(b * h + i) * w + j] = src[(b * H + i * sy + sy / 2) * W + j * sx + sx / 2];
  return out;
}

std::vector<double> default_ds_weights(std::size_t heads) {
  if (heads == 0) return {};
  std::vector<double> w(heads);
  for (std::size_t l = 0; l + 1 < heads; ++l) w[l] = std::ldexp(1.0, -static_cast<int>(l + 1));
  w[heads - 1] = heads == 1 ? 1.0 : std::ldexp(1.0, -static_cast<int>(heads - 1));
  return w;
}

Tensor deep_supervised_loss(const std::vector<Tensor>& heads, const Tensor& target,
                            const std::vector<double>& weights) {
  if (heads.empty()) throw DimensionError("deep_supervised_loss: no heads");
  if (weights.size() != heads.size())
    throw ConfigError("deep supervision has " + std::to_string(heads.size()) + " heads but " +
                      std::to_string(weights.size()) + " weights");
  double total = 0;
  for (double v : weights) {
    if (!(v >= 0)) throw ConfigError("deep supervision weights must be >= 0");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("deep supervision weights must sum to 1");
  Tensor loss;
  for (std::size_t l = 0; l < heads.size(); ++l) {
    if (weights[l] == 0) continue;
    const Tensor t = downsample_labels(target, heads[l].dim(2), heads[l].dim(3));
    const Tensor term = mul_scalar(dice_ce_loss(heads[l], t), weights[l]);
    loss = loss.defined() ? add(loss, term) : term;
  }
  return loss;
}

}  // namespace swum
