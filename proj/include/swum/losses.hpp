#pragma once

#include <vector>

#include "swum/tensor.hpp"

namespace swum {

/// Soft Dice + cross-entropy. logits [B,K,h,w] (f32/f64), target [B,h,w] u8.
///
/// Dice is batch Dice per foreground class k >= 1 that occurs in the target,
/// (2*sum(p*g) + 1e-5) / (sum(p) + sum(g) + 1e-5), and the Dice term is one
/// minus their mean (zero when no foreground class occurs). Cross-entropy is
/// the mean over pixels. Labels >= K raise DataError.
Tensor dice_ce_loss(const Tensor& logits, const Tensor& target);

struct DiceCeParts {
  double dice_term = 0;  // 1 - mean Dice
  double ce = 0;
};
DiceCeParts dice_ce_parts(const Tensor& logits, const Tensor& target);

/// Nearest-neighbour label downsampling to h x w; the source pixel of output
/// (i, j) is (i*s + s/2, j*t + t/2) with integer strides s, t.
Tensor downsample_labels(const Tensor& target, std::int64_t h, std::int64_t w);

/// 1/2, 1/4, ... with the last two weights equal, so the sum is exactly 1.
std::vector<double> default_ds_weights(std::size_t heads);

/// sum_l weights[l] * dice_ce_loss(heads[l], downsample(target)). Heads with
/// weight 0 are left out of the graph entirely.
Tensor deep_supervised_loss(const std::vector<Tensor>& heads, const Tensor& target,
                            const std::vector<double>& weights);

}  // namespace swum
