#include "swum/ops.hpp"

#include <Eigen/Core>
#include <cmath>
#include <numeric>

#include "swum/autograd.hpp"
#include "swum/instrument.hpp"

namespace swum {

namespace {

template <class T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  if (a.dtype() != b.dtype()) throw DimensionError(std::string(op) + ": dtype mismatch");
}

int normalize_axis(int axis, int ndim, const char* op) {
  const int a = axis < 0 ? axis + ndim : axis;
  if (a < 0 || a >= ndim)
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for rank " +
                         std::to_string(ndim));
  return a;
}

// Elementwise unary op with derivative d(x, y) evaluated at input x / output y.
template <class Fwd, class Deriv>
Tensor unary(const Tensor& x, std::string_view name, Fwd fwd, Deriv deriv) {
  Tensor out = Tensor::zeros(x.shape(), x.dtype());
  if (!compute_enabled()) return out;
  dispatch_float(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto xs = x.data<T>();
    auto ys = out.data<T>();
    for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = static_cast<T>(fwd(static_cast<double>(xs[i])));
  });
  return record(out, name, {x}, [x, deriv](const Tensor& y, const Tensor& g) {
    Tensor gx = Tensor::zeros(x.shape(), x.dtype());
    dispatch_float(x.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto xs = x.data<T>();
      auto ys = y.data<T>();
      auto gs = g.data<T>();
      auto out = gx.data<T>();
      for (std::size_t i = 0; i < xs.size(); ++i)
        out[i] = static_cast<T>(gs[i] * deriv(static_cast<double>(xs[i]), static_cast<double>(ys[i])));
    });
    return std::vector<Tensor>{gx};
  });
}

std::vector<std::int64_t> strides_of(const Shape& s) {
  std::vector<std::int64_t> st(s.size(), 1);
  for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i) st[i] = st[i + 1] * s[i + 1];
  return st;
}

}  // namespace

// ---- gather ----

Tensor gather_flat(const Tensor& x, Shape out_shape, std::vector<std::int64_t> index, std::string_view name) {
  Tensor out = Tensor::zeros(std::move(out_shape), x.dtype());
  if (!compute_enabled()) return out;
  std::visit(
      [&](const auto& src) {
        using V = std::decay_t<decltype(src)>;
        auto& dst = std::get<V>(out.impl()->data);
        for (std::size_t i = 0; i < index.size(); ++i) dst[i] = src[static_cast<std::size_t>(index[i])];
      },
      x.impl()->data);
  if (!needs_grad({&x})) return out;
  auto shared = std::make_shared<std::vector<std::int64_t>>(std::move(index));
  return record(out, name, {x}, [shared, xs = x.shape(), dt = x.dtype()](const Tensor&, const Tensor& g) {
    Tensor gx = Tensor::zeros(xs, dt);
    dispatch_float(dt, [&](auto tag) {
      using T = decltype(tag);
      auto gs = g.data<T>();
      auto dst = gx.data<T>();
      const auto& idx = *shared;
      for (std::size_t i = 0; i < idx.size(); ++i) dst[static_cast<std::size_t>(idx[i])] += gs[i];
    });
    return std::vector<Tensor>{gx};
  });
}

// ---- elementwise ----

namespace {

enum class BinOp { add, sub, mul };

Tensor binary(const Tensor& a, const Tensor& b, BinOp op, std::string_view name) {
  require_same(a, b, name.data());
  Tensor out = Tensor::zeros(a.shape(), a.dtype());
  if (!compute_enabled()) return out;
  dispatch_float(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto as = a.data<T>();
    auto bs = b.data<T>();
    auto ys = out.data<T>();
    for (std::size_t i = 0; i < as.size(); ++i) {
      switch (op) {
        case BinOp::add: ys[i] = as[i] + bs[i]; break;
        case BinOp::sub: ys[i] = as[i] - bs[i]; break;
        case BinOp::mul: ys[i] = as[i] * bs[i]; break;
      }
    }
  });
  return record(out, name, {a, b}, [a, b, op](const Tensor&, const Tensor& g) {
    std::vector<Tensor> gins(2);
    switch (op) {
      case BinOp::add:
        gins[0] = g;
        gins[1] = g;
        break;
      case BinOp::sub:
        gins[0] = g;
        gins[1] = Tensor::zeros(g.shape(), g.dtype());
        dispatch_float(g.dtype(), [&](auto tag) {
          using T = decltype(tag);
          auto gs = g.data<T>();
          auto d = gins[1].data<T>();
          for (std::size_t i = 0; i < gs.size(); ++i) d[i] = -gs[i];
        });
        break;
      case BinOp::mul:
        gins[0] = Tensor::zeros(g.shape(), g.dtype());
        gins[1] = Tensor::zeros(g.shape(), g.dtype());
        dispatch_float(g.dtype(), [&](auto tag) {
          using T = decltype(tag);
          auto gs = g.data<T>();
          auto as = a.data<T>();
          auto bs = b.data<T>();
          auto ga = gins[0].data<T>();
          auto gb = gins[1].data<T>();
          for (std::size_t i = 0; i < gs.size(); ++i) {
            ga[i] = gs[i] * bs[i];
            gb[i] = gs[i] * as[i];
          }
        });
        break;
    }
    return gins;
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::mul, "mul"); }

Tensor add_scalar(const Tensor& x, double c) {
  return unary(x, "add_scalar", [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& x, double c) {
  return unary(x, "mul_scalar", [c](double v) { return v * c; }, [c](double, double) { return c; });
}

Tensor neg(const Tensor& x) { return mul_scalar(x, -1.0); }

Tensor exp(const Tensor& x) {
  return unary(x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary(x, "log", [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor add_bias(const Tensor& x, const Tensor& bias, int axis) {
  const int ax = normalize_axis(axis, x.ndim(), "add_bias");
  const std::int64_t c = x.dim(ax);
  if (bias.ndim() != 1 || bias.dim(0) != c)
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " does not match axis " + std::to_string(ax) +
                         " of extent " + std::to_string(c));
  if (bias.dtype() != x.dtype()) throw DimensionError("add_bias: dtype mismatch");
  std::int64_t inner = 1;
  for (int i = ax + 1; i < x.ndim(); ++i) inner *= x.dim(i);
  const std::int64_t outer = x.numel() / (inner * c);
  Tensor out = Tensor::zeros(x.shape(), x.dtype());
  if (!compute_enabled()) return out;
  dispatch_float(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto xs = x.data<T>();
    auto bs = bias.data<T>();
    auto ys = out.data<T>();
    std::size_t i = 0;
    for (std::int64_t o = 0; o < outer; ++o)
      for (std::int64_t k = 0; k < c; ++k)
        for (std::int64_t j = 0; j < inner; ++j, ++i) ys[i] = xs[i] + bs[k];
  });
  return record(out, "add_bias", {x, bias}, [c, inner, outer](const Tensor&, const Tensor& g) {
    Tensor gb = Tensor::zeros({c}, g.dtype());
    dispatch_float(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto gs = g.data<T>();
      std::vector<double> acc(static_cast<std::size_t>(c), 0.0);
      std::size_t i = 0;
      for (std::int64_t o = 0; o < outer; ++o)
        for (std::int64_t k = 0; k < c; ++k)
          for (std::int64_t j = 0; j < inner; ++j, ++i) acc[static_cast<std::size_t>(k)] += gs[i];
      auto d = gb.data<T>();
      for (std::int64_t k = 0; k < c; ++k) d[k] = static_cast<T>(acc[static_cast<std::size_t>(k)]);
    });
    return std::vector<Tensor>{g, gb};
  });
}

// ---- activations ----

namespace {
double sigmoid_d(double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); }
double softplus_d(double v) { return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }
}  // namespace

Tensor silu(const Tensor& x) {
  return unary(
      x, "silu", [](double v) { return v * sigmoid_d(v); },
      [](double v, double) {
        const double s = sigmoid_d(v);
        return s * (1.0 + v * (1.0 - s));
      });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x, "sigmoid", sigmoid_d, [](double, double y) { return y * (1.0 - y); });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  return unary(
      x, "leaky_relu", [slope](double v) { return v > 0 ? v : slope * v; },
      [slope](double v, double) { return v > 0 ? 1.0 : slope; });
}

Tensor softplus(const Tensor& x) {
  return unary(x, "softplus", softplus_d, [](double v, double) { return sigmoid_d(v); });
}

Tensor softmax(const Tensor& x, int axis) {
  const int ax = normalize_axis(axis, x.ndim(), "softmax");
  const std::int64_t k = x.dim(ax);
  std::int64_t inner = 1;
  for (int i = ax + 1; i < x.ndim(); ++i) inner *= x.dim(i);
  const std::int64_t outer = x.numel() / (inner * k);
  Tensor out = Tensor::zeros(x.shape(), x.dtype());
  if (!compute_enabled()) return out;
  dispatch_float(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto xs = x.data<T>();
    auto ys = out.data<T>();
    std::vector<double> e(static_cast<std::size_t>(k));
    for (std::int64_t o = 0; o < outer; ++o)
      for (std::int64_t j = 0; j < inner; ++j) {
        const std::int64_t base = o * k * inner + j;
        double mx = -INFINITY;
        for (std::int64_t c = 0; c < k; ++c) mx = std::max(mx, static_cast<double>(xs[base + c * inner]));
        double s = 0;
        for (std::int64_t c = 0; c < k; ++c) s += (e[c] = std::exp(xs[base + c * inner] - mx));
        for (std::int64_t c = 0; c < k; ++c) ys[base + c * inner] = static_cast<T>(e[c] / s);
      }
  });
  return record(out, "softmax", {x}, [k, inner, outer](const Tensor& y, const Tensor& g) {
    Tensor gx = Tensor::zeros(y.shape(), y.dtype());
    dispatch_float(y.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto ys = y.data<T>();
      auto gs = g.data<T>();
      auto d = gx.data<T>();
      for (std::int64_t o = 0; o < outer; ++o)
        for (std::int64_t j = 0; j < inner; ++j) {
          const std::int64_t base = o * k * inner + j;
          double dot = 0;
          for (std::int64_t c = 0; c < k; ++c) dot += static_cast<double>(gs[base + c * inner]) * ys[base + c * inner];
          for (std::int64_t c = 0; c < k; ++c)
            d[base + c * inner] = static_cast<T>(ys[base + c * inner] * (gs[base + c * inner] - dot));
        }
    });
    return std::vector<Tensor>{gx};
  });
}

// ---- reductions ----

namespace {
Tensor reduce_sum(const Tensor& x, double scale, std::string_view name) {
  Tensor out = Tensor::zeros({1}, x.dtype());
  dispatch_float(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    double acc = 0;
    for (T v : x.data<T>()) acc += v;
    out.data<T>()[0] = static_cast<T>(acc * scale);
  });
  return record(out, name, {x}, [scale, xs = x.shape()](const Tensor&, const Tensor& g) {
    return std::vector<Tensor>{Tensor::full(xs, g.item() * scale, g.dtype())};
  });
}
}  // namespace

Tensor sum(const Tensor& x) { return reduce_sum(x, 1.0, "sum"); }
Tensor mean(const Tensor& x) { return reduce_sum(x, 1.0 / static_cast<double>(x.numel()), "mean"); }

// ---- layout ----

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel_of(shape) != x.numel())
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  Tensor out = x.clone();
  out.impl()->shape = std::move(shape);
  return record(out, "reshape", {x}, [xs = x.shape()](const Tensor&, const Tensor& g) {
    Tensor gx = g.clone();
    gx.impl()->shape = xs;
    return std::vector<Tensor>{gx};
  });
}

Tensor permute(const Tensor& x, const std::vector<int>& order) {
  const int n = x.ndim();
  if (static_cast<int>(order.size()) != n) throw DimensionError("permute: order rank mismatch");
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  Shape out_shape(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int a = normalize_axis(order[i], n, "permute");
    if (used[a]) throw DimensionError("permute: repeated axis");
    used[a] = true;
    out_shape[i] = x.dim(a);
  }
  if (!compute_enabled()) return Tensor::zeros(out_shape, x.dtype());
  const auto in_st = strides_of(x.shape());
  std::vector<std::int64_t> idx(static_cast<std::size_t>(x.numel()));
  std::vector<std::int64_t> counter(static_cast<std::size_t>(n), 0);
  std::int64_t src = 0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    idx[i] = src;
    for (int a = n - 1; a >= 0; --a) {
      const int ia = order[a] < 0 ? order[a] + n : order[a];
      ++counter[a];
      src += in_st[ia];
      if (counter[a] < out_shape[a]) break;
      src -= in_st[ia] * out_shape[a];
      counter[a] = 0;
    }
  }
  return gather_flat(x, out_shape, std::move(idx), "permute");
}

Tensor nchw_to_nhwc(const Tensor& x) { return permute(x, {0, 2, 3, 1}); }
Tensor nhwc_to_nchw(const Tensor& x) { return permute(x, {0, 3, 1, 2}); }

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const int n = parts[0].ndim();
  const int ax = normalize_axis(axis, n, "concat");
  Shape out_shape = parts[0].shape();
  out_shape[ax] = 0;
  for (const auto& p : parts) {
    if (p.ndim() != n || p.dtype() != parts[0].dtype()) throw DimensionError("concat: rank or dtype mismatch");
    for (int i = 0; i < n; ++i)
      if (i != ax && p.dim(i) != parts[0].dim(i))
        throw DimensionError("concat: axis " + std::to_string(i) + " differs: " + shape_str(p.shape()) + " vs " +
                             shape_str(parts[0].shape()));
    out_shape[ax] += p.dim(ax);
  }
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < ax; ++i) outer *= out_shape[i];
  for (int i = ax + 1; i < n; ++i) inner *= out_shape[i];
  Tensor out = Tensor::zeros(out_shape, parts[0].dtype());
  std::vector<std::int64_t> chunks;
  for (const auto& p : parts) chunks.push_back(p.dim(ax) * inner);
  const std::int64_t row = out_shape[ax] * inner;
  if (compute_enabled()) {
    dispatch_float(out.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto ys = out.data<T>();
      std::int64_t off = 0;
      for (std::size_t p = 0; p < parts.size(); ++p) {
        auto xs = parts[p].data<T>();
        for (std::int64_t o = 0; o < outer; ++o)
          std::copy_n(xs.begin() + o * chunks[p], chunks[p], ys.begin() + o * row + off);
        off += chunks[p];
      }
    });
  }
  return record(out, "concat", parts, [parts, chunks, outer, row](const Tensor&, const Tensor& g) {
    std::vector<Tensor> gins;
    std::int64_t off = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
      Tensor gp = Tensor::zeros(parts[p].shape(), g.dtype());
      dispatch_float(g.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto gs = g.data<T>();
        auto d = gp.data<T>();
        for (std::int64_t o = 0; o < outer; ++o)
          std::copy_n(gs.begin() + o * row + off, chunks[p], d.begin() + o * chunks[p]);
      });
      off += chunks[p];
      gins.push_back(gp);
    }
    return gins;
  });
}

Tensor slice(const Tensor& x, int axis, std::int64_t start, std::int64_t length) {
  const int ax = normalize_axis(axis, x.ndim(), "slice");
  if (start < 0 || length <= 0 || start + length > x.dim(ax))
    throw DimensionError("slice: [" + std::to_string(start) + ", +" + std::to_string(length) + ") outside axis " +
                         std::to_string(ax) + " of " + shape_str(x.shape()));
  Shape out_shape = x.shape();
  out_shape[ax] = length;
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < ax; ++i) outer *= x.dim(i);
  for (int i = ax + 1; i < x.ndim(); ++i) inner *= x.dim(i);
  if (!compute_enabled()) return Tensor::zeros(out_shape, x.dtype());
  std::vector<std::int64_t> idx;
  idx.reserve(static_cast<std::size_t>(numel_of(out_shape)));
  for (std::int64_t o = 0; o < outer; ++o)
    for (std::int64_t k = 0; k < length; ++k)
      for (std::int64_t j = 0; j < inner; ++j) idx.push_back((o * x.dim(ax) + start + k) * inner + j);
  return gather_flat(x, out_shape, std::move(idx), "slice");
}

Tensor select(const Tensor& x, int axis, std::int64_t index) {
  const int ax = normalize_axis(axis, x.ndim(), "select");
  if (x.ndim() < 2) throw DimensionError("select: needs rank >= 2");
  Tensor s = slice(x, ax, index, 1);
  Shape shape = x.shape();
  shape.erase(shape.begin() + ax);
  return reshape(s, shape);
}

Tensor merge_gather2x2(const Tensor& x) {
  if (x.ndim() != 4) throw DimensionError("patch merge expects [B,H,W,d], got " + shape_str(x.shape()));
  const auto b = x.dim(0), h = x.dim(1), w = x.dim(2), d = x.dim(3);
  if (h % 2 || w % 2)
    throw DimensionError("patch merge needs even H and W, got H=" + std::to_string(h) + " W=" + std::to_string(w));
  Shape out_shape{b, h / 2, w / 2, 4 * d};
  if (!compute_enabled()) return Tensor::zeros(out_shape, x.dtype());
  std::vector<std::int64_t> idx;
  idx.reserve(static_cast<std::size_t>(x.numel()));
  static constexpr int kDy[4] = {0, 1, 0, 1};
  static constexpr int kDx[4] = {0, 0, 1, 1};
  for (std::int64_t n = 0; n < b; ++n)
    for (std::int64_t i = 0; i < h / 2; ++i)
      for (std::int64_t j = 0; j < w / 2; ++j)
        for (int s = 0; s < 4; ++s)
          for (std::int64_t c = 0; c < d; ++c)
            idx.push_back(((n * h + 2 * i + kDy[s]) * w + 2 * j + kDx[s]) * d + c);
  return gather_flat(x, out_shape, std::move(idx), "merge_gather2x2");
}

Tensor depth_to_space(const Tensor& x, int factor) {
  if (x.ndim() != 4) throw DimensionError("depth_to_space expects [B,H,W,C], got " + shape_str(x.shape()));
  const std::int64_t f = factor;
  const auto b = x.dim(0), h = x.dim(1), w = x.dim(2), cin = x.dim(3);
  if (factor < 1 || cin % (f * f))
    throw DimensionError("depth_to_space: channels " + std::to_string(cin) + " not divisible by " +
                         std::to_string(f * f));
  const std::int64_t c = cin / (f * f);
  Shape out_shape{b, h * f, w * f, c};
  if (!compute_enabled()) return Tensor::zeros(out_shape, x.dtype());
  std::vector<std::int64_t> idx;
  idx.reserve(static_cast<std::size_t>(x.numel()));
  for (std::int64_t n = 0; n < b; ++n)
    for (std::int64_t oy = 0; oy < h * f; ++oy)
      for (std::int64_t ox = 0; ox < w * f; ++ox) {
        const std::int64_t i = oy / f, dy = oy % f, j = ox / f, dx = ox % f;
        for (std::int64_t k = 0; k < c; ++k) idx.push_back(((n * h + i) * w + j) * cin + (dy * f + dx) * c + k);
      }
  return gather_flat(x, out_shape, std::move(idx), "depth_to_space");
}

// ---- linear ----

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (w.ndim() != 2) throw DimensionError("linear: weight must be [Dout, Din], got " + shape_str(w.shape()));
  const std::int64_t din = w.dim(1), dout = w.dim(0);
  if (x.dim(-1) != din)
    throw DimensionError("linear: trailing axis " + std::to_string(x.ndim() - 1) + " of input " + shape_str(x.shape()) +
                         " must equal Din=" + std::to_string(din));
  if (w.dtype() != x.dtype()) throw DimensionError("linear: dtype mismatch");
  const std::int64_t rows = x.numel() / din;
  Shape out_shape = x.shape();
  out_shape.back() = dout;
  add_macs("linear", rows * din * dout);
  Tensor out = Tensor::zeros(out_shape, x.dtype());
  if (compute_enabled()) {
    dispatch_float(x.dtype(), [&](auto tag) {
      using T = decltype(tag);
      Eigen::Map<const MatR<T>> X(x.data<T>().data(), rows, din);
      Eigen::Map<const MatR<T>> W(w.data<T>().data(), dout, din);
      Eigen::Map<MatR<T>> Y(out.data<T>().data(), rows, dout);
      Y.noalias() = X * W.transpose();
    });
  }
  out = record(out, "linear", {x, w}, [x, w, rows, din, dout](const Tensor&, const Tensor& g) {
    std::vector<Tensor> gins(2);
    dispatch_float(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      Eigen::Map<const MatR<T>> G(g.data<T>().data(), rows, dout);
      if (x.requires_grad()) {
        gins[0] = Tensor::zeros(x.shape(), x.dtype());
        Eigen::Map<const MatR<T>> W(w.data<T>().data(), dout, din);
        Eigen::Map<MatR<T>> GX(gins[0].data<T>().data(), rows, din);
        GX.noalias() = G * W;
      }
      if (w.requires_grad()) {
        gins[1] = Tensor::zeros(w.shape(), w.dtype());
        Eigen::Map<const MatR<T>> X(x.data<T>().data(), rows, din);
        Eigen::Map<MatR<T>> GW(gins[1].data<T>().data(), dout, din);
        GW.noalias() = G.transpose() * X;
      }
    });
    return gins;
  });
  if (b.defined()) out = add_bias(out, b, -1);
  return out;
}

// ---- helpers ----

bool all_finite(const Tensor& t) {
  return std::visit(
      [](const auto& v) {
        for (auto e : v)
          if (!std::isfinite(static_cast<double>(e))) return false;
        return true;
      },
      t.impl()->data);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw DimensionError("max_abs_diff: shape mismatch");
  double m = 0;
  for (std::int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.at(i) - b.at(i)));
  return m;
}

double inner_product(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw DimensionError("inner_product: shape mismatch");
  double s = 0;
  for (std::int64_t i = 0; i < a.numel(); ++i) s += a.at(i) * b.at(i);
  return s;
}

}  // namespace swum
