#include "swum/ssm.hpp"

#include <bit>
#include <cmath>

#include "swum/autograd.hpp"
#include "swum/instrument.hpp"
#include "swum/ops.hpp"

namespace swum::ssm {

std::int64_t default_dt_rank(std::int64_t d) { return (d + 15) / 16; }

void S6Params::validate() const {
  auto expect = [](const Tensor& t, const Shape& s, const char* what) {
    if (!t.defined() || t.shape() != s)
      throw DimensionError(std::string("S6Params.") + what + " must be " + shape_str(s) +
                           (t.defined() ? ", got " + shape_str(t.shape()) : ", got undefined"));
  };
  if (d_inner < 1 || d_state < 1 || dt_rank < 1) throw DimensionError("S6Params: sizes must be positive");
  expect(A_log, {d_inner, d_state}, "A_log");
  expect(D_skip, {d_inner}, "D_skip");
  expect(x_proj, {dt_rank + 2 * d_state, d_inner}, "x_proj");
  expect(dt_proj_weight, {d_inner, dt_rank}, "dt_proj_weight");
  expect(dt_proj_bias, {d_inner}, "dt_proj_bias");
}

void Ss2dParams::validate() const {
  for (const auto& p : dirs) {
    p.validate();
    if (p.d_inner != dirs[0].d_inner || p.d_state != dirs[0].d_state)
      throw DimensionError("Ss2dParams: all four directions must share (d_inner, d_state)");
  }
}

namespace {

struct ScanDims {
  std::int64_t B, L, d, N;
};

ScanDims check_scan_inputs(const Tensor& u, const Tensor& delta, const Tensor& A, const Tensor& Bm, const Tensor& Cm,
                           const Tensor& D) {
  if (u.ndim() != 3) throw DimensionError("selective_scan: u must be [B,L,d], got " + shape_str(u.shape()));
  const ScanDims s{u.dim(0), u.dim(1), u.dim(2), A.ndim() == 2 ? A.dim(1) : 0};
  if (s.L < 1) throw DimensionError("selective_scan: sequence length must be >= 1");
  if (delta.shape() != u.shape()) throw DimensionError("selective_scan: delta " + shape_str(delta.shape()) + " != u " + shape_str(u.shape()));
  if (A.shape() != Shape{s.d, s.N}) throw DimensionError("selective_scan: A must be [d,N], got " + shape_str(A.shape()));
  if (Bm.shape() != Shape{s.B, s.L, s.N}) throw DimensionError("selective_scan: B must be [B,L,N], got " + shape_str(Bm.shape()));
  if (Cm.shape() != Shape{s.B, s.L, s.N}) throw DimensionError("selective_scan: C must be [B,L,N], got " + shape_str(Cm.shape()));
  if (D.shape() != Shape{s.d}) throw DimensionError("selective_scan: D must be [d], got " + shape_str(D.shape()));
  for (const Tensor* t : {&delta, &A, &Bm, &Cm, &D})
    if (t->dtype() != u.dtype()) throw DimensionError("selective_scan: dtype mismatch");
  return s;
}

// Affine map h -> a*h + b; compose(later, earlier) applies `earlier` first.
struct Affine {
  double a, b;
};
inline Affine compose(const Affine& later, const Affine& earlier) {
  return {later.a * earlier.a, later.a * earlier.b + later.b};
}

// Inclusive Blelloch scan in place; buf.size() is a power of two.
void blelloch_inclusive(std::vector<Affine>& buf, std::vector<Affine>& elems) {
  const std::size_t P = buf.size();
  for (std::size_t d = 1; d < P; d *= 2)
    for (std::size_t i = 2 * d - 1; i < P; i += 2 * d) buf[i] = compose(buf[i], buf[i - d]);
  buf[P - 1] = {1.0, 0.0};
  for (std::size_t d = P / 2; d >= 1; d /= 2) {
    for (std::size_t i = 2 * d - 1; i < P; i += 2 * d) {
      const Affine left = buf[i - d];
      buf[i - d] = buf[i];
      buf[i] = compose(left, buf[i]);
    }
    if (d == 1) break;
  }
  // buf now holds exclusive prefixes; fold in each element.
  for (std::size_t i = 0; i < P; ++i) buf[i] = compose(elems[i], buf[i]);
}

template <class T>
void scan_forward(const T* u, const T* dl, const T* A, const T* Bm, const T* Cm, const T* D, T* y, const ScanDims& s,
                  ScanAlgorithm algo) {
  const std::int64_t L = s.L, d = s.d, N = s.N;
  if (algo == ScanAlgorithm::sequential) {
    std::vector<double> h(static_cast<std::size_t>(N));
    for (std::int64_t b = 0; b < s.B; ++b)
      for (std::int64_t c = 0; c < d; ++c) {
        std::fill(h.begin(), h.end(), 0.0);
        for (std::int64_t t = 0; t < L; ++t) {
          const std::int64_t i = (b * L + t) * d + c;
          const double dt = dl[i], ut = u[i];
          const T* bt = Bm + (b * L + t) * N;
          const T* ct = Cm + (b * L + t) * N;
          double acc = 0;
          for (std::int64_t n = 0; n < N; ++n) {
            h[n] = std::exp(dt * A[c * N + n]) * h[n] + dt * bt[n] * ut;
            acc += ct[n] * h[n];
          }
          y[i] = static_cast<T>(acc + D[c] * ut);
        }
      }
    return;
  }
  const std::size_t P = std::bit_ceil(static_cast<std::size_t>(L));
  std::vector<Affine> buf(P), elems(P);
  std::vector<double> acc(static_cast<std::size_t>(L));
  for (std::int64_t b = 0; b < s.B; ++b)
    for (std::int64_t c = 0; c < d; ++c) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::int64_t n = 0; n < N; ++n) {
        for (std::int64_t t = 0; t < L; ++t) {
          const std::int64_t i = (b * L + t) * d + c;
          const double dt = dl[i];
          elems[t] = {std::exp(dt * A[c * N + n]), dt * Bm[(b * L + t) * N + n] * static_cast<double>(u[i])};
        }
        for (std::size_t t = static_cast<std::size_t>(L); t < P; ++t) elems[t] = {1.0, 0.0};
        buf = elems;
        blelloch_inclusive(buf, elems);
        for (std::int64_t t = 0; t < L; ++t) acc[t] += Cm[(b * L + t) * N + n] * buf[t].b;
      }
      for (std::int64_t t = 0; t < L; ++t) {
        const std::int64_t i = (b * L + t) * d + c;
        y[i] = static_cast<T>(acc[t] + D[c] * static_cast<double>(u[i]));
      }
    }
}

}  // namespace

Tensor selective_scan(const Tensor& u, const Tensor& delta, const Tensor& A, const Tensor& Bm, const Tensor& Cm,
                      const Tensor& D, ScanAlgorithm algo) {
  const ScanDims s = check_scan_inputs(u, delta, A, Bm, Cm, D);
  add_macs("scan", 9 * s.B * s.L * s.d * s.N + s.B * s.L * s.d);
  Tensor out = Tensor::zeros(u.shape(), u.dtype());
  if (!compute_enabled()) return out;
  for (const Tensor* t : {&u, &delta, &A, &Bm, &Cm, &D})
    if (!all_finite(*t)) throw NumericError("selective_scan: non-finite input");

  dispatch_float(u.dtype(), [&](auto tag) {
    using T = decltype(tag);
    scan_forward<T>(u.data<T>().data(), delta.data<T>().data(), A.data<T>().data(), Bm.data<T>().data(),
                    Cm.data<T>().data(), D.data<T>().data(), out.data<T>().data(), s, algo);
  });

  return record(out, "selective_scan", {u, delta, A, Bm, Cm, D}, [u, delta, A, Bm, Cm, D, s](const Tensor&, const Tensor& g) {
    const std::int64_t L = s.L, d = s.d, N = s.N;
    std::vector<double> gu(static_cast<std::size_t>(u.numel()), 0.0), gdl(gu.size(), 0.0);
    std::vector<double> gA(static_cast<std::size_t>(d * N), 0.0), gD(static_cast<std::size_t>(d), 0.0);
    std::vector<double> gB(static_cast<std::size_t>(Bm.numel()), 0.0), gC(gB.size(), 0.0);
    dispatch_float(u.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto us = u.data<T>();
      auto ds = delta.data<T>();
      auto As = A.data<T>();
      auto Bs = Bm.data<T>();
      auto Cs = Cm.data<T>();
      auto Ds = D.data<T>();
      auto gy = g.data<T>();
      // hs[t * N + n]: state after step t, recomputed per (b, c).
      std::vector<double> hs(static_cast<std::size_t>(L * N)), gh(static_cast<std::size_t>(N));
      for (std::int64_t b = 0; b < s.B; ++b)
        for (std::int64_t c = 0; c < d; ++c) {
          for (std::int64_t t = 0; t < L; ++t) {
            const std::int64_t i = (b * L + t) * d + c;
            for (std::int64_t n = 0; n < N; ++n) {
              const double prev = t ? hs[(t - 1) * N + n] : 0.0;
              hs[t * N + n] = std::exp(ds[i] * As[c * N + n]) * prev + ds[i] * Bs[(b * L + t) * N + n] * us[i];
            }
          }
          std::fill(gh.begin(), gh.end(), 0.0);
          for (std::int64_t t = L - 1; t >= 0; --t) {
            const std::int64_t i = (b * L + t) * d + c;
            const double gyt = gy[i], ut = us[i], dt = ds[i];
            gD[c] += gyt * ut;
            gu[i] += gyt * Ds[c];
            for (std::int64_t n = 0; n < N; ++n) {
              const std::int64_t bn = (b * L + t) * N + n;
              const double an = As[c * N + n];
              const double abar = std::exp(dt * an);
              const double prev = t ? hs[(t - 1) * N + n] : 0.0;
              gC[bn] += gyt * hs[t * N + n];
              gh[n] += gyt * Cs[bn];
              const double ga = gh[n] * prev * abar;  // d/d(dt*an) of abar*prev
              gdl[i] += ga * an + gh[n] * Bs[bn] * ut;
              gA[c * N + n] += ga * dt;
              gB[bn] += gh[n] * dt * ut;
              gu[i] += gh[n] * dt * Bs[bn];
              gh[n] *= abar;
            }
          }
        }
    });
    auto pack = [](const Tensor& like, const std::vector<double>& v) {
      Tensor t = Tensor::zeros(like.shape(), like.dtype());
      dispatch_float(like.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto o = t.data<T>();
        for (std::size_t i = 0; i < v.size(); ++i) o[i] = static_cast<T>(v[i]);
      });
      return t;
    };
    return std::vector<Tensor>{pack(u, gu), pack(delta, gdl), pack(A, gA), pack(Bm, gB), pack(Cm, gC), pack(D, gD)};
  });
}

Tensor s6_scan(const Tensor& x, const S6Params& p, ScanAlgorithm algo) {
  p.validate();
  if (x.ndim() != 3 || x.dim(2) != p.d_inner)
    throw DimensionError("s6_scan: input must be [B,L," + std::to_string(p.d_inner) + "], got " + shape_str(x.shape()));
  const Tensor xdbl = linear(x, p.x_proj);
  const Tensor dt_low = slice(xdbl, -1, 0, p.dt_rank);
  const Tensor Bm = slice(xdbl, -1, p.dt_rank, p.d_state);
  const Tensor Cm = slice(xdbl, -1, p.dt_rank + p.d_state, p.d_state);
  const Tensor delta = softplus(linear(dt_low, p.dt_proj_weight, p.dt_proj_bias));
  const Tensor A = neg(exp(p.A_log));
  return selective_scan(x, delta, A, Bm, Cm, p.D_skip, algo);
}

std::vector<std::int64_t> scan_order(std::int64_t h, std::int64_t w, ScanDirection v) {
  if (h < 1 || w < 1) throw DimensionError("scan_order: grid must be at least 1x1");
  const std::int64_t L = h * w;
  std::vector<std::int64_t> order(static_cast<std::size_t>(L));
  for (std::int64_t t = 0; t < L; ++t) {
    switch (v) {
      case ScanDirection::row_major: order[t] = t; break;
      case ScanDirection::col_major: order[t] = (t % h) * w + t / h; break;
      case ScanDirection::row_major_rev: order[t] = L - 1 - t; break;
      case ScanDirection::col_major_rev: {
        const std::int64_t r = L - 1 - t;
        order[t] = (r % h) * w + r / h;
        break;
      }
    }
  }
  return order;
}

Tensor expand(const Tensor& z, ScanDirection v) {
  if (z.ndim() != 4) throw DimensionError("expand: input must be [B,d,H,W], got " + shape_str(z.shape()));
  const std::int64_t B = z.dim(0), d = z.dim(1), H = z.dim(2), W = z.dim(3), L = H * W;
  if (!compute_enabled()) return Tensor::zeros({B, L, d}, z.dtype());
  const auto order = scan_order(H, W, v);
  std::vector<std::int64_t> idx;
  idx.reserve(static_cast<std::size_t>(z.numel()));
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t t = 0; t < L; ++t)
      for (std::int64_t c = 0; c < d; ++c) idx.push_back((b * d + c) * L + order[t]);
  return gather_flat(z, {B, L, d}, std::move(idx), "expand");
}

Tensor merge(const std::array<Tensor, 4>& ys, std::int64_t h, std::int64_t w) {
  const Shape& s0 = ys[0].shape();
  for (const auto& y : ys)
    if (y.shape() != s0) throw DimensionError("merge: direction outputs differ in shape: " + shape_str(y.shape()) + " vs " + shape_str(s0));
  if (s0.size() != 3 || s0[1] != h * w)
    throw DimensionError("merge: inputs must be [B," + std::to_string(h * w) + ",d], got " + shape_str(s0));
  const std::int64_t B = s0[0], L = s0[1], d = s0[2];
  Tensor total;
  for (std::size_t v = 0; v < 4; ++v) {
    Tensor part;
    if (!compute_enabled()) {
      part = Tensor::zeros({B, d, h, w}, ys[v].dtype());
    } else {
      const auto order = scan_order(h, w, kAllDirections[v]);
      std::vector<std::int64_t> step_at(static_cast<std::size_t>(L));
      for (std::int64_t t = 0; t < L; ++t) step_at[order[t]] = t;
      std::vector<std::int64_t> idx;
      idx.reserve(static_cast<std::size_t>(ys[v].numel()));
      for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t c = 0; c < d; ++c)
          for (std::int64_t pos = 0; pos < L; ++pos) idx.push_back((b * L + step_at[pos]) * d + c);
      part = gather_flat(ys[v], {B, d, h, w}, std::move(idx), "merge");
    }
    total = v == 0 ? part : add(total, part);
  }
  return total;
}

Tensor ss2d(const Tensor& z, const Ss2dParams& p, ScanAlgorithm algo) {
  p.validate();
  if (z.ndim() != 4 || z.dim(1) != p.dirs[0].d_inner)
    throw DimensionError("ss2d: input must be [B," + std::to_string(p.dirs[0].d_inner) + ",H,W], got " + shape_str(z.shape()));
  std::array<Tensor, 4> ys;
  for (std::size_t v = 0; v < 4; ++v) ys[v] = s6_scan(expand(z, kAllDirections[v]), p.dirs[v], algo);
  return merge(ys, z.dim(2), z.dim(3));
}

}  // namespace swum::ssm
