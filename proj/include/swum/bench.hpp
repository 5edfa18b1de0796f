#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace swum {

struct BenchOptions {
  int min_log2 = 12;
  int max_log2 = 17;
  std::vector<std::int64_t> lengths;  // explicit lengths; overrides the 2^min..2^max range
  int attention_max_log2 = 13;  // L^2 memory/time cap for the reference
  std::int64_t d_inner = 16;
  std::int64_t d_state = 16;
  int reps = 3;
  std::uint64_t seed = 0;
};

struct BenchRow {
  std::string method;  // s6_sequential, s6_parallel, ss2d, attention
  std::int64_t length = 0;
  double seconds = 0;  // min over reps
  double ratio = 0;    // seconds / seconds at half the length, 0 for the first row
};

struct BenchReport {
  BenchOptions options;
  std::vector<BenchRow> rows;
  /// Largest doubling ratio seen for a method (0 when fewer than two rows).
  double max_ratio(const std::string& method) const;
  /// Geometric mean of the doubling ratios: (t_last / t_first)^(1 / doublings).
  double mean_ratio(const std::string& method) const;
  std::string table() const;
  nlohmann::json to_json() const;
};

/// Wall-clock timings of forward-only S6 and SS2D over L = 2^min..2^max
/// (SS2D on an H x W grid with H = 2^floor(log2(L)/2)) and of dense softmax
/// attention with head width d_inner up to 2^attention_max_log2.
/// Ratios are per step of the length list, so they are doubling ratios
/// only for the default power-of-two range.
BenchReport bench_scan(const BenchOptions& opt);

}  // namespace swum
