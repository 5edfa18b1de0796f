#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "swum/tensor.hpp"

namespace swum {

/// Row-major 2D integer map: class labels or instance ids (0 = background).
struct LabelMap {
  std::int64_t h = 0, w = 0;
  std::vector<std::int32_t> data;

  LabelMap() = default;
  LabelMap(std::int64_t h_, std::int64_t w_) : h(h_), w(w_), data(static_cast<std::size_t>(h_ * w_), 0) {}
  std::int32_t& at(std::int64_t i, std::int64_t j) { return data[static_cast<std::size_t>(i * w + j)]; }
  std::int32_t at(std::int64_t i, std::int64_t j) const { return data[static_cast<std::size_t>(i * w + j)]; }

  static LabelMap from_tensor(const Tensor& t);  // [H,W], any dtype
};

/// 2|P&G| / (|P|+|G|) for class k; 1 when both are empty.
double dsc(const LabelMap& pred, const LabelMap& gt, int k);

/// Boundary pixels: in the mask with at least one 4-neighbour outside it
/// (the image border counts as outside).
std::vector<std::pair<std::int64_t, std::int64_t>> boundary_pixels(const LabelMap& m, int k);

/// Surface agreement at tolerance tau (Euclidean, pixels): boundary pixels of
/// either mask lying within tau of the other mask's boundary, divided by the
/// total boundary size. 1 when both are empty, 0 when exactly one is.
double nsd(const LabelMap& pred, const LabelMap& gt, int k, double tau = 2.0);

/// 4-connected components of class k, numbered 1.. in raster order.
LabelMap connected_components(const LabelMap& m, int k);

/// Greedy one-to-one matching of instances by descending IoU, keeping pairs
/// with IoU >= thresh; F1 = 2TP / (2TP + FP + FN), 1 when both are empty.
double instance_f1(const LabelMap& pred, const LabelMap& gt, double iou_thresh = 0.5);

struct MetricReport {
  int num_classes = 0;
  std::vector<double> dsc;  // per class 1..K-1 (index 0 unused)
  std::vector<double> nsd;
  double mean_dsc = 0, mean_nsd = 0;
  std::optional<double> f1;  // instance mode only
  std::size_t samples = 0;

  std::string table() const;
  nlohmann::json to_json() const;
};

/// Accumulates per-sample metrics; per-class values are sample means,
/// the headline means average over foreground classes.
class MetricAccumulator {
 public:
  MetricAccumulator(int num_classes, double tau = 2.0, bool instance_mode = false);
  void add(const LabelMap& pred, const LabelMap& gt);
  MetricReport report() const;

 private:
  int K_;
  double tau_;
  bool instance_;
  std::vector<double> dsc_sum_, nsd_sum_;
  double f1_sum_ = 0;
  std::size_t n_ = 0;
};

/// Argmax over axis 1 of logits [B,K,H,W] -> one LabelMap per batch entry.
std::vector<LabelMap> argmax_labels(const Tensor& logits);

}  // namespace swum
