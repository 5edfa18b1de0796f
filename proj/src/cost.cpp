#include "swum/cost.hpp"

#include <cstdio>
#include <set>

#include "swum/autograd.hpp"
#include "swum/instrument.hpp"

namespace swum {

const char* CostReport::convention() {
  return "1 multiply-accumulate = 1 FLOP over conv, transpose conv, linear and selective scan "
         "(9*L*d*N + L*d per direction); norms, activations and elementwise ops not counted";
}

namespace {

void fill_params(CostReport& r, const Network& net) {
  for (const auto& [name, t] : net.params().items()) {
    r.params_by_module[module_of(name)] += t.numel();
    r.total_params += t.numel();
  }
}

void fill_flops(CostReport& r, const Network& net, std::int64_t h, std::int64_t w) {
  net.config().check_input(h, w);
  CostTally tally;
  {
    NoGradGuard ng;
    TallyScope scope(tally, true);
    net.forward(Tensor::zeros({1, net.config().input_channels, h, w}, net.dtype()));
  }
  r.input_h = h;
  r.input_w = w;
  r.flops = tally.total;
  r.flops_by_module = tally.by_module;
  r.flops_by_kind = tally.by_kind;
}

std::string giga(std::int64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2fG", static_cast<double>(v) / 1e9);
  return buf;
}

std::string mega(std::int64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2fM", static_cast<double>(v) / 1e6);
  return buf;
}

}  // namespace

CostReport count_params(const ModelConfig& cfg) {
  const Network net(cfg, 0, DType::f32, false);
  CostReport r;
  r.variant = variant_name(cfg.variant);
  fill_params(r, net);
  return r;
}

CostReport count_flops(const ModelConfig& cfg, std::int64_t h, std::int64_t w) {
  const Network net(cfg, 0, DType::f32, false);
  CostReport r;
  r.variant = variant_name(cfg.variant);
  fill_flops(r, net, h, w);
  return r;
}

CostReport count_cost(const ModelConfig& cfg, std::int64_t h, std::int64_t w) {
  const Network net(cfg, 0, DType::f32, false);
  CostReport r;
  r.variant = variant_name(cfg.variant);
  fill_params(r, net);
  fill_flops(r, net, h, w);
  return r;
}

std::string CostReport::table() const {
  std::set<std::string> modules;
  for (const auto& [m, n] : params_by_module) modules.insert(m);
  for (const auto& [m, n] : flops_by_module) modules.insert(m);
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-28s %16s %18s\n", "module", "params", "flops");
  out += line;
  for (const auto& m : modules) {
    auto p = params_by_module.find(m);
    auto f = flops_by_module.find(m);
    std::snprintf(line, sizeof line, "%-28s %16lld %18lld\n", m.c_str(),
                  static_cast<long long>(p == params_by_module.end() ? 0 : p->second),
                  static_cast<long long>(f == flops_by_module.end() ? 0 : f->second));
    out += line;
  }
  std::snprintf(line, sizeof line, "%-28s %16lld %18lld\n", "total", static_cast<long long>(total_params),
                static_cast<long long>(flops));
  out += line;
  for (const auto& [k, v] : flops_by_kind) {
    std::snprintf(line, sizeof line, "  flops[%s] = %lld\n", k.c_str(), static_cast<long long>(v));
    out += line;
  }
  out += variant + " @ " + std::to_string(input_h) + "x" + std::to_string(input_w) + ": " + mega(total_params) +
         " params, " + giga(flops) + " FLOPs\n";
  out += std::string("convention: ") + convention() + "\n";
  return out;
}

nlohmann::json CostReport::to_json() const {
  return {{"variant", variant},
          {"input_size", {input_h, input_w}},
          {"total_params", total_params},
          {"params_by_module", params_by_module},
          {"flops", flops},
          {"flops_by_module", flops_by_module},
          {"flops_by_kind", flops_by_kind},
          {"convention", convention()}};
}

}  // namespace swum
