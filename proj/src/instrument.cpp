#include "swum/instrument.hpp"

namespace swum {

namespace {
thread_local CostTally* g_tally = nullptr;
thread_local bool g_shape_only = false;
thread_local std::string g_module = "other";
}  // namespace

TallyScope::TallyScope(CostTally& tally, bool shape_only) : previous_(g_tally), previous_shape_only_(g_shape_only) {
  g_tally = &tally;
  g_shape_only = shape_only;
}

TallyScope::~TallyScope() {
  g_tally = previous_;
  g_shape_only = previous_shape_only_;
}

ModuleScope::ModuleScope(std::string name) : previous_(std::move(g_module)) { g_module = std::move(name); }

ModuleScope::~ModuleScope() { g_module = std::move(previous_); }

void add_macs(std::string_view kind, std::int64_t macs) {
  if (!g_tally) return;
  g_tally->total += macs;
  g_tally->by_module[g_module] += macs;
  g_tally->by_kind[std::string(kind)] += macs;
}

bool compute_enabled() { return !g_shape_only; }

}  // namespace swum
