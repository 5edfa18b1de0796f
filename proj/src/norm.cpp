#include <cmath>
#include <memory>

#include "swum/autograd.hpp"
#include "swum/instrument.hpp"
#include "swum/ops.hpp"

namespace swum {

namespace {

// `groups` contiguous runs of `count` elements, each normalised on its own.
struct NormLayout {
  std::int64_t groups;
  std::int64_t count;
  bool per_element_affine;  // true: gamma indexed by e; false: by channel of q
  std::int64_t channels;    // instance norm: q % channels
};

struct NormStats {
  std::vector<double> mean, rstd;
};

Tensor normalize(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps, NormLayout L,
                 std::string_view name) {
  if (!(eps > 0)) throw DimensionError(std::string(name) + ": eps must be > 0");
  const std::int64_t affine_len = L.per_element_affine ? L.count : L.channels;
  for (const Tensor* p : {&gamma, &beta})
    if (p->ndim() != 1 || p->dim(0) != affine_len || p->dtype() != x.dtype())
      throw DimensionError(std::string(name) + ": affine parameter " + shape_str(p->shape()) + " must be [" +
                           std::to_string(affine_len) + "]");
  Tensor out = Tensor::zeros(x.shape(), x.dtype());
  if (!compute_enabled()) return out;
  auto stats = std::make_shared<NormStats>();
  stats->mean.resize(static_cast<std::size_t>(L.groups));
  stats->rstd.resize(static_cast<std::size_t>(L.groups));
  dispatch_float(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto xs = x.data<T>();
    auto ys = out.data<T>();
    auto gs = gamma.data<T>();
    auto bs = beta.data<T>();
    for (std::int64_t q = 0; q < L.groups; ++q) {
      const T* px = xs.data() + q * L.count;
      double m = 0;
      for (std::int64_t e = 0; e < L.count; ++e) m += px[e];
      m /= static_cast<double>(L.count);
      double v = 0;
      for (std::int64_t e = 0; e < L.count; ++e) v += (px[e] - m) * (px[e] - m);
      v /= static_cast<double>(L.count);
      const double r = 1.0 / std::sqrt(v + eps);
      stats->mean[q] = m;
      stats->rstd[q] = r;
      T* py = ys.data() + q * L.count;
      for (std::int64_t e = 0; e < L.count; ++e) {
        const std::int64_t a = L.per_element_affine ? e : q % L.channels;
        py[e] = static_cast<T>((px[e] - m) * r * gs[a] + bs[a]);
      }
    }
  });
  return record(out, name, {x, gamma, beta}, [x, gamma, stats, L](const Tensor&, const Tensor& g) {
    std::vector<Tensor> gins(3);
    const std::int64_t alen = gamma.dim(0);
    gins[0] = Tensor::zeros(x.shape(), x.dtype());
    gins[1] = Tensor::zeros({alen}, x.dtype());
    gins[2] = Tensor::zeros({alen}, x.dtype());
    dispatch_float(x.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto xs = x.data<T>();
      auto gy = g.data<T>();
      auto gam = gamma.data<T>();
      auto gx = gins[0].data<T>();
      std::vector<double> ggam(static_cast<std::size_t>(alen), 0.0), gbet(static_cast<std::size_t>(alen), 0.0);
      std::vector<double> xhat(static_cast<std::size_t>(L.count)), gxh(static_cast<std::size_t>(L.count));
      for (std::int64_t q = 0; q < L.groups; ++q) {
        const double m = stats->mean[q], r = stats->rstd[q];
        double s1 = 0, s2 = 0;
        for (std::int64_t e = 0; e < L.count; ++e) {
          const std::int64_t i = q * L.count + e;
          const std::int64_t a = L.per_element_affine ? e : q % L.channels;
          xhat[e] = (xs[i] - m) * r;
          gxh[e] = gy[i] * static_cast<double>(gam[a]);
          ggam[a] += gy[i] * xhat[e];
          gbet[a] += gy[i];
          s1 += gxh[e];
          s2 += gxh[e] * xhat[e];
        }
        s1 /= static_cast<double>(L.count);
        s2 /= static_cast<double>(L.count);
        for (std::int64_t e = 0; e < L.count; ++e)
          gx[q * L.count + e] = static_cast<T>(r * (gxh[e] - s1 - xhat[e] * s2));
      }
      auto dg = gins[1].data<T>();
      auto db = gins[2].data<T>();
      for (std::int64_t a = 0; a < alen; ++a) {
        dg[a] = static_cast<T>(ggam[a]);
        db[a] = static_cast<T>(gbet[a]);
      }
    });
    return gins;
  });
}

}  // namespace

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::int64_t d = x.dim(-1);
  return normalize(x, gamma, beta, eps, {x.numel() / d, d, true, 0}, "layer_norm");
}

Tensor instance_norm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (x.ndim() != 4) throw DimensionError("instance_norm2d expects NCHW, got " + shape_str(x.shape()));
  const std::int64_t c = x.dim(1);
  const std::int64_t hw = x.dim(2) * x.dim(3);
  return normalize(x, gamma, beta, eps, {x.dim(0) * c, hw, false, c}, "instance_norm2d");
}

}  // namespace swum
