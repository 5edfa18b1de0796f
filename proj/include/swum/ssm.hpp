#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "swum/tensor.hpp"

namespace swum::ssm {

/// Learned parameters of one selective scan over `d_inner` channels.
///
/// A = -exp(A_log) is strictly negative, so every channel/state decays.
/// x_proj maps each input vector to (dt_rank, d_state, d_state) widths:
/// the low-rank step input, B_t and C_t.
struct S6Params {
  std::int64_t d_inner = 0;
  std::int64_t d_state = 16;
  std::int64_t dt_rank = 1;
  Tensor A_log;           // [d_inner, d_state]
  Tensor D_skip;          // [d_inner]
  Tensor x_proj;          // [dt_rank + 2 * d_state, d_inner]
  Tensor dt_proj_weight;  // [d_inner, dt_rank]
  Tensor dt_proj_bias;    // [d_inner]

  void validate() const;
};

std::int64_t default_dt_rank(std::int64_t d);  // ceil(d / 16)

/// Scan orders over an H x W grid: row-major, column-major and their
/// reversals.
enum class ScanDirection : int { row_major = 1, col_major = 2, row_major_rev = 3, col_major_rev = 4 };
inline constexpr std::array<ScanDirection, 4> kAllDirections = {ScanDirection::row_major, ScanDirection::col_major,
                                                                ScanDirection::row_major_rev,
                                                                ScanDirection::col_major_rev};

/// One S6Params per direction, all with the same (d_inner, d_state).
struct Ss2dParams {
  std::array<S6Params, 4> dirs;
  void validate() const;
};

enum class ScanAlgorithm { sequential, parallel };

/// Selective-scan core over precomputed inputs.
///   u, delta: [B, L, d]   A: [d, N]   Bm, Cm: [B, L, N]   D: [d]
///   h_t = exp(delta_t * A) * h_{t-1} + delta_t * Bm_t * u_t,   h_0 = 0
///   y_t = <Cm_t, h_t> + D * u_t
/// State arithmetic runs in double for both f32 and f64 tensors. Counted as
/// 9*B*L*d*N + B*L*d MACs.
Tensor selective_scan(const Tensor& u, const Tensor& delta, const Tensor& A, const Tensor& Bm, const Tensor& Cm,
                      const Tensor& D, ScanAlgorithm algo);

/// Full S6 over x[B, L, d]: projections, softplus step, A = -exp(A_log), scan.
Tensor s6_scan(const Tensor& x, const S6Params& p, ScanAlgorithm algo);
inline Tensor s6_scan_sequential(const Tensor& x, const S6Params& p) { return s6_scan(x, p, ScanAlgorithm::sequential); }
inline Tensor s6_scan_parallel(const Tensor& x, const S6Params& p) { return s6_scan(x, p, ScanAlgorithm::parallel); }

/// order[t] = flat grid position (i * W + j) visited at step t.
std::vector<std::int64_t> scan_order(std::int64_t h, std::int64_t w, ScanDirection v);

/// [B, d, H, W] -> [B, H*W, d] in direction v. Pure permutation.
Tensor expand(const Tensor& z, ScanDirection v);

/// Inverse-permutes each ys[v] back to [B, d, H, W] and sums in order 1..4.
Tensor merge(const std::array<Tensor, 4>& ys, std::int64_t h, std::int64_t w);

/// merge over v of s6(expand(z, v)).
Tensor ss2d(const Tensor& z, const Ss2dParams& p, ScanAlgorithm algo = ScanAlgorithm::sequential);

}  // namespace swum::ssm
