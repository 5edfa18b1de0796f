#include <Eigen/Core>
#include <algorithm>

#include "swum/autograd.hpp"
#include "swum/instrument.hpp"
#include "swum/ops.hpp"

namespace swum {

namespace {

template <class T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Geometry of a forward convolution from an "image" of size H x W to an
// output grid Ho x Wo. conv_transpose2d reuses it with the roles swapped.
struct Geometry {
  std::int64_t channels, h, w, kh, kw, stride, pad, ho, wo;
  std::int64_t rows() const { return channels * kh * kw; }
  std::int64_t cols() const { return ho * wo; }
};

constexpr std::int64_t kColBudget = 1 << 22;  // elements per im2col chunk

std::int64_t chunk_cols(const Geometry& g) { return std::max<std::int64_t>(1, std::min(g.cols(), kColBudget / g.rows())); }

// col[rows x n] for output pixels [start, start + n) of channels [c0, c0 + g.channels).
template <class T>
void im2col(const T* img, const Geometry& g, std::int64_t start, std::int64_t n, T* col) {
  for (std::int64_t c = 0; c < g.channels; ++c)
    for (std::int64_t ky = 0; ky < g.kh; ++ky)
      for (std::int64_t kx = 0; kx < g.kw; ++kx) {
        T* row = col + ((c * g.kh + ky) * g.kw + kx) * n;
        const T* plane = img + c * g.h * g.w;
        for (std::int64_t q = 0; q < n; ++q) {
          const std::int64_t pix = start + q;
          const std::int64_t iy = (pix / g.wo) * g.stride - g.pad + ky;
          const std::int64_t ix = (pix % g.wo) * g.stride - g.pad + kx;
          row[q] = (iy >= 0 && iy < g.h && ix >= 0 && ix < g.w) ? plane[iy * g.w + ix] : T(0);
        }
      }
}

template <class T>
void col2im(const T* col, const Geometry& g, std::int64_t start, std::int64_t n, T* img) {
  for (std::int64_t c = 0; c < g.channels; ++c)
    for (std::int64_t ky = 0; ky < g.kh; ++ky)
      for (std::int64_t kx = 0; kx < g.kw; ++kx) {
        const T* row = col + ((c * g.kh + ky) * g.kw + kx) * n;
        T* plane = img + c * g.h * g.w;
        for (std::int64_t q = 0; q < n; ++q) {
          const std::int64_t pix = start + q;
          const std::int64_t iy = (pix / g.wo) * g.stride - g.pad + ky;
          const std::int64_t ix = (pix % g.wo) * g.stride - g.pad + kx;
          if (iy >= 0 && iy < g.h && ix >= 0 && ix < g.w) plane[iy * g.w + ix] += row[q];
        }
      }
}

void check_4d(const Tensor& t, const char* op, const char* what) {
  if (t.ndim() != 4)
    throw DimensionError(std::string(op) + ": " + what + " must be 4-D, got " + shape_str(t.shape()));
}

// Depthwise-style grouped conv (one input channel per group) done directly.
template <class T>
void grouped_direct_forward(const T* x, const T* w, T* y, std::int64_t B, std::int64_t C, std::int64_t O,
                            const Geometry& g) {
  const std::int64_t per = O / C;
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t o = 0; o < O; ++o) {
      const T* plane = x + (b * C + o / per) * g.h * g.w;
      const T* k = w + o * g.kh * g.kw;
      T* out = y + (b * O + o) * g.ho * g.wo;
      for (std::int64_t oy = 0; oy < g.ho; ++oy)
        for (std::int64_t ox = 0; ox < g.wo; ++ox) {
          T acc = 0;
          for (std::int64_t ky = 0; ky < g.kh; ++ky) {
            const std::int64_t iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= g.h) continue;
            for (std::int64_t kx = 0; kx < g.kw; ++kx) {
              const std::int64_t ix = ox * g.stride - g.pad + kx;
              if (ix >= 0 && ix < g.w) acc += k[ky * g.kw + kx] * plane[iy * g.w + ix];
            }
          }
          out[oy * g.wo + ox] = acc;
        }
    }
}

template <class T>
void grouped_direct_backward(const T* x, const T* w, const T* gy, T* gx, T* gw, std::int64_t B, std::int64_t C,
                             std::int64_t O, const Geometry& g) {
  const std::int64_t per = O / C;
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t o = 0; o < O; ++o) {
      const std::int64_t pi = (b * C + o / per) * g.h * g.w;
      const T* k = w + o * g.kh * g.kw;
      const T* go = gy + (b * O + o) * g.ho * g.wo;
      for (std::int64_t oy = 0; oy < g.ho; ++oy)
        for (std::int64_t ox = 0; ox < g.wo; ++ox) {
          const T gv = go[oy * g.wo + ox];
          for (std::int64_t ky = 0; ky < g.kh; ++ky) {
            const std::int64_t iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= g.h) continue;
            for (std::int64_t kx = 0; kx < g.kw; ++kx) {
              const std::int64_t ix = ox * g.stride - g.pad + kx;
              if (ix < 0 || ix >= g.w) continue;
              if (gx) gx[pi + iy * g.w + ix] += gv * k[ky * g.kw + kx];
              if (gw) gw[o * g.kh * g.kw + ky * g.kw + kx] += gv * x[pi + iy * g.w + ix];
            }
          }
        }
    }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, Conv2dOptions opt) {
  check_4d(x, "conv2d", "input");
  check_4d(w, "conv2d", "weight");
  if (x.dtype() != w.dtype()) throw DimensionError("conv2d: dtype mismatch");
  if (opt.stride < 1 || opt.padding < 0 || opt.groups < 1) throw DimensionError("conv2d: invalid stride/padding/groups");
  const std::int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::int64_t O = w.dim(0), kh = w.dim(2), kw = w.dim(3), G = opt.groups;
  if (C % G) throw DimensionError("conv2d: axis 1 (channels=" + std::to_string(C) + ") not divisible by groups=" + std::to_string(G));
  if (O % G) throw DimensionError("conv2d: weight axis 0 (out channels=" + std::to_string(O) + ") not divisible by groups");
  if (w.dim(1) != C / G)
    throw DimensionError("conv2d: weight axis 1 is " + std::to_string(w.dim(1)) + " but input axis 1 gives C/groups=" +
                         std::to_string(C / G));
  if (H + 2 * opt.padding < kh) throw DimensionError("conv2d: axis 2 (H=" + std::to_string(H) + ") smaller than kernel");
  if (W + 2 * opt.padding < kw) throw DimensionError("conv2d: axis 3 (W=" + std::to_string(W) + ") smaller than kernel");
  const std::int64_t Ho = (H + 2 * opt.padding - kh) / opt.stride + 1;
  const std::int64_t Wo = (W + 2 * opt.padding - kw) / opt.stride + 1;
  const Geometry geo{C / G, H, W, kh, kw, opt.stride, opt.padding, Ho, Wo};
  add_macs("conv", B * O * Ho * Wo * (C / G) * kh * kw);

  Tensor out = Tensor::zeros({B, O, Ho, Wo}, x.dtype());
  const bool direct = (C / G == 1);
  const std::int64_t Og = O / G;
  if (compute_enabled()) {
    dispatch_float(x.dtype(), [&](auto tag) {
      using T = decltype(tag);
      const T* xp = x.data<T>().data();
      const T* wp = w.data<T>().data();
      T* yp = out.data<T>().data();
      if (direct) {
        grouped_direct_forward(xp, wp, yp, B, C, O, geo);
        return;
      }
      const std::int64_t chunk = chunk_cols(geo);
      std::vector<T> col(static_cast<std::size_t>(geo.rows() * chunk));
      for (std::int64_t n = 0; n < B; ++n)
        for (std::int64_t gi = 0; gi < G; ++gi) {
          const T* img = xp + (n * C + gi * geo.channels) * H * W;
          Eigen::Map<const MatR<T>> Wm(wp + gi * Og * geo.rows(), Og, geo.rows());
          Eigen::Map<MatR<T>> Y(yp + (n * O + gi * Og) * Ho * Wo, Og, Ho * Wo);
          for (std::int64_t s = 0; s < geo.cols(); s += chunk) {
            const std::int64_t len = std::min(chunk, geo.cols() - s);
            im2col(img, geo, s, len, col.data());
            Eigen::Map<const MatR<T>> Cm(col.data(), geo.rows(), len);
            Y.middleCols(s, len).noalias() = Wm * Cm;
          }
        }
    });
  }

  out = record(out, "conv2d", {x, w}, [x, w, geo, B, C, O, G, Og, direct](const Tensor&, const Tensor& g) {
    std::vector<Tensor> gins(2);
    const bool want_x = x.requires_grad(), want_w = w.requires_grad();
    if (want_x) gins[0] = Tensor::zeros(x.shape(), x.dtype());
    if (want_w) gins[1] = Tensor::zeros(w.shape(), w.dtype());
    dispatch_float(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      const T* xp = x.data<T>().data();
      const T* wp = w.data<T>().data();
      const T* gp = g.data<T>().data();
      T* gxp = want_x ? gins[0].data<T>().data() : nullptr;
      T* gwp = want_w ? gins[1].data<T>().data() : nullptr;
      if (direct) {
        grouped_direct_backward(xp, wp, gp, gxp, gwp, B, C, O, geo);
        return;
      }
      const std::int64_t chunk = chunk_cols(geo);
      std::vector<T> col(static_cast<std::size_t>(geo.rows() * chunk));
      MatR<T> gcol;
      for (std::int64_t n = 0; n < B; ++n)
        for (std::int64_t gi = 0; gi < G; ++gi) {
          const std::int64_t img_off = (n * C + gi * geo.channels) * geo.h * geo.w;
          Eigen::Map<const MatR<T>> Wm(wp + gi * Og * geo.rows(), Og, geo.rows());
          Eigen::Map<const MatR<T>> Gy(gp + (n * O + gi * Og) * geo.cols(), Og, geo.cols());
          for (std::int64_t s = 0; s < geo.cols(); s += chunk) {
            const std::int64_t len = std::min(chunk, geo.cols() - s);
            if (gwp) {
              im2col(xp + img_off, geo, s, len, col.data());
              Eigen::Map<const MatR<T>> Cm(col.data(), geo.rows(), len);
              Eigen::Map<MatR<T>> GW(gwp + gi * Og * geo.rows(), Og, geo.rows());
              GW.noalias() += Gy.middleCols(s, len) * Cm.transpose();
            }
            if (gxp) {
              gcol.noalias() = Wm.transpose() * Gy.middleCols(s, len);
              col2im(gcol.data(), geo, s, len, gxp + img_off);
            }
          }
        }
    });
    return gins;
  });
  if (b.defined()) out = add_bias(out, b, 1);
  return out;
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding) {
  check_4d(x, "conv_transpose2d", "input");
  check_4d(w, "conv_transpose2d", "weight");
  if (x.dtype() != w.dtype()) throw DimensionError("conv_transpose2d: dtype mismatch");
  if (stride < 1 || padding < 0) throw DimensionError("conv_transpose2d: stride must be >= 1");
  const std::int64_t B = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (w.dim(0) != Cin)
    throw DimensionError("conv_transpose2d: weight axis 0 is " + std::to_string(w.dim(0)) +
                         " but input axis 1 has " + std::to_string(Cin) + " channels");
  const std::int64_t Cout = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  const std::int64_t Ho = (H - 1) * stride - 2 * padding + kh;
  const std::int64_t Wo = (W - 1) * stride - 2 * padding + kw;
  if (Ho < 1) throw DimensionError("conv_transpose2d: axis 2 output extent would be " + std::to_string(Ho));
  if (Wo < 1) throw DimensionError("conv_transpose2d: axis 3 output extent would be " + std::to_string(Wo));
  // The output plays the role of the conv "image", the input the conv output grid.
  const Geometry geo{Cout, Ho, Wo, kh, kw, stride, padding, H, W};
  add_macs("deconv", B * Cin * H * W * Cout * kh * kw);

  Tensor out = Tensor::zeros({B, Cout, Ho, Wo}, x.dtype());
  if (compute_enabled()) {
    dispatch_float(x.dtype(), [&](auto tag) {
      using T = decltype(tag);
      Eigen::Map<const MatR<T>> Wm(w.data<T>().data(), Cin, geo.rows());
      const std::int64_t chunk = chunk_cols(geo);
      MatR<T> col;
      for (std::int64_t n = 0; n < B; ++n) {
        Eigen::Map<const MatR<T>> X(x.data<T>().data() + n * Cin * H * W, Cin, H * W);
        for (std::int64_t s = 0; s < geo.cols(); s += chunk) {
          const std::int64_t len = std::min(chunk, geo.cols() - s);
          col.noalias() = Wm.transpose() * X.middleCols(s, len);
          col2im(col.data(), geo, s, len, out.data<T>().data() + n * Cout * Ho * Wo);
        }
      }
    });
  }

  out = record(out, "conv_transpose2d", {x, w}, [x, w, geo, B, Cin, Cout](const Tensor&, const Tensor& g) {
    std::vector<Tensor> gins(2);
    const bool want_x = x.requires_grad(), want_w = w.requires_grad();
    if (want_x) gins[0] = Tensor::zeros(x.shape(), x.dtype());
    if (want_w) gins[1] = Tensor::zeros(w.shape(), w.dtype());
    dispatch_float(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      Eigen::Map<const MatR<T>> Wm(w.data<T>().data(), Cin, geo.rows());
      const std::int64_t chunk = chunk_cols(geo);
      std::vector<T> col(static_cast<std::size_t>(geo.rows() * chunk));
      for (std::int64_t n = 0; n < B; ++n) {
        const T* gimg = g.data<T>().data() + n * Cout * geo.h * geo.w;
        Eigen::Map<const MatR<T>> X(x.data<T>().data() + n * Cin * geo.cols(), Cin, geo.cols());
        for (std::int64_t s = 0; s < geo.cols(); s += chunk) {
          const std::int64_t len = std::min(chunk, geo.cols() - s);
          im2col(gimg, geo, s, len, col.data());
          Eigen::Map<const MatR<T>> Cm(col.data(), geo.rows(), len);
          if (want_x) {
            Eigen::Map<MatR<T>> GX(gins[0].data<T>().data() + n * Cin * geo.cols(), Cin, geo.cols());
            GX.middleCols(s, len).noalias() += Wm * Cm;
          }
          if (want_w) {
            Eigen::Map<MatR<T>> GW(gins[1].data<T>().data(), Cin, geo.rows());
            GW.noalias() += X.middleCols(s, len) * Cm.transpose();
          }
        }
      }
    });
    return gins;
  });
  if (b.defined()) out = add_bias(out, b, 1);
  return out;
}

}  // namespace swum
