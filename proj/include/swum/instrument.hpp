#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

namespace swum {

/// Multiply-accumulate tally collected from an instrumented forward. One MAC
/// counts as one FLOP; norms, activations and elementwise ops are not counted.
struct CostTally {
  std::int64_t total = 0;
  std::map<std::string, std::int64_t> by_module;
  std::map<std::string, std::int64_t> by_kind;  // conv, linear, deconv, scan
};

/// Routes MAC counts from every op on this thread into `tally` while alive.
/// With shape_only = true, ops skip their arithmetic and return zero-filled
/// outputs of the right shape, so full-size networks can be counted quickly.
class TallyScope {
 public:
  TallyScope(CostTally& tally, bool shape_only = false);
  ~TallyScope();
  TallyScope(const TallyScope&) = delete;
  TallyScope& operator=(const TallyScope&) = delete;

 private:
  CostTally* previous_;
  bool previous_shape_only_;
};

/// Names the module that subsequent MACs are attributed to.
class ModuleScope {
 public:
  explicit ModuleScope(std::string name);
  ~ModuleScope();
  ModuleScope(const ModuleScope&) = delete;
  ModuleScope& operator=(const ModuleScope&) = delete;

 private:
  std::string previous_;
};

void add_macs(std::string_view kind, std::int64_t macs);

/// False inside a shape-only TallyScope.
bool compute_enabled();

}  // namespace swum
