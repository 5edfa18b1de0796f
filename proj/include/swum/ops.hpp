#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "swum/tensor.hpp"

// Differentiable tensor ops. Images are NCHW, sequences (B, L, D). Binary
// elementwise ops require identical shapes; the only broadcasts are bias
// adds and scalars.

namespace swum {

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& x, double c);
Tensor mul_scalar(const Tensor& x, double c);
Tensor neg(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);

/// Adds bias[C] along `axis` (NCHW channel bias: axis 1; features: axis -1).
Tensor add_bias(const Tensor& x, const Tensor& bias, int axis);

// ---- activations ----
Tensor silu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope = 0.01);
Tensor softplus(const Tensor& x);
Tensor softmax(const Tensor& x, int axis);

// ---- reductions ----
Tensor sum(const Tensor& x);   // -> shape [1]
Tensor mean(const Tensor& x);  // -> shape [1]

// ---- layout ----

/// out.flat[i] = x.flat[index[i]]; the backward pass scatter-adds.
Tensor gather_flat(const Tensor& x, Shape out_shape, std::vector<std::int64_t> index,
                   std::string_view name = "gather");

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<int>& order);
Tensor nchw_to_nhwc(const Tensor& x);
Tensor nhwc_to_nchw(const Tensor& x);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& x, int axis, std::int64_t start, std::int64_t length);
Tensor select(const Tensor& x, int axis, std::int64_t index);  // drops the axis

/// Patch-merging 2x2 neighbour gather on NHWC: [B,H,W,d] -> [B,H/2,W/2,4d] with
/// channel slots (dy,dx) = (0,0), (1,0), (0,1), (1,1).
Tensor merge_gather2x2(const Tensor& x);

/// Pixel rearrangement on NHWC: [B,H,W,f*f*c] -> [B,fH,fW,c]; input channel
/// (dy*f + dx)*c + k lands at output pixel (f*i+dy, f*j+dx), channel k.
Tensor depth_to_space(const Tensor& x, int factor);

// ---- layers ----

/// x[..., Din] @ w[Dout, Din]^T + b.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b = {});

struct Conv2dOptions {
  int stride = 1;
  int padding = 0;
  int groups = 1;
};

/// x[B,C,H,W], w[O,C/g,kh,kw], b[O] (optional).
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b = {}, Conv2dOptions opt = {});

/// Adjoint of conv2d: x[B,Cin,H,W], w[Cin,Cout,kh,kw], output
/// [B,Cout,(H-1)*stride-2*padding+kh, ...].
Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& b = {}, int stride = 1, int padding = 0);

/// Normalises over the last axis.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

/// Normalises each (b, c) plane of an NCHW tensor over H*W.
Tensor instance_norm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// ---- helpers (not recorded) ----
bool all_finite(const Tensor& t);
double max_abs_diff(const Tensor& a, const Tensor& b);
double inner_product(const Tensor& a, const Tensor& b);  // f64 accumulation

}  // namespace swum
