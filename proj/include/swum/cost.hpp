#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "json.hpp"
#include "swum/model.hpp"

namespace swum {

struct CostReport {
  std::string variant;
  std::int64_t input_h = 0, input_w = 0;
  std::int64_t total_params = 0;
  std::map<std::string, std::int64_t> params_by_module;
  std::int64_t flops = 0;  // multiply-accumulates at batch 1
  std::map<std::string, std::int64_t> flops_by_module;
  std::map<std::string, std::int64_t> flops_by_kind;

  static const char* convention();
  std::string table() const;
  nlohmann::json to_json() const;
};

CostReport count_params(const ModelConfig& cfg);

/// Instrumented shape-only forward of a batch-1 input of size h x w.
CostReport count_flops(const ModelConfig& cfg, std::int64_t h, std::int64_t w);

/// Both of the above in one report.
CostReport count_cost(const ModelConfig& cfg, std::int64_t h, std::int64_t w);

}  // namespace swum
