#include "swum/optim.hpp"

#include <cmath>
#include <numbers>

#include "swum/ops.hpp"

namespace swum {

AdamW::AdamW(std::vector<std::pair<std::string, Tensor>> params, AdamWOptions opt) : opt_(opt) {
  for (auto& [name, t] : params) {
    if (!is_floating(t.dtype())) throw ConfigError("AdamW: parameter " + name + " is not floating point");
    const auto n = static_cast<std::size_t>(t.numel());
    slots_.push_back({name, t, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0});
  }
}

void AdamW::step(double lr, const std::set<std::string>& frozen) {
  for (const auto& s : slots_) {
    if (frozen.count(s.name)) continue;
    const Tensor g = s.param.grad();
    if (g.defined() && !all_finite(g)) throw NumericError("non-finite gradient in " + s.name + "; step aborted");
  }
  for (auto& s : slots_) {
    if (frozen.count(s.name)) continue;
    const Tensor g = s.param.grad();
    if (!g.defined()) continue;
    ++s.t;
    const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(s.t));
    const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(s.t));
    Tensor p = s.param;
    dispatch_float(p.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto w = p.data<T>();
      const auto gv = g.data<T>();
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = gv[i];
        s.m[i] = opt_.beta1 * s.m[i] + (1 - opt_.beta1) * gi;
        s.v[i] = opt_.beta2 * s.v[i] + (1 - opt_.beta2) * gi * gi;
        double x = w[i];
        x -= lr * opt_.weight_decay * x;
        x -= lr * (s.m[i] / bc1) / (std::sqrt(s.v[i] / bc2) + opt_.eps);
        w[i] = static_cast<T>(x);
      }
    });
  }
}

void AdamW::zero_grad() {
  for (auto& s : slots_) s.param.zero_grad();
}

std::int64_t AdamW::steps_of(const std::string& name) const {
  for (const auto& s : slots_)
    if (s.name == name) return s.t;
  throw ConfigError("AdamW: unknown parameter " + name);
}

double cosine_lr(double base, std::int64_t t, std::int64_t T) {
  if (T <= 0 || t >= T) return 0.0;
  if (t <= 0) return base;
  return 0.5 * base * (1.0 + std::cos(std::numbers::pi * static_cast<double>(t) / static_cast<double>(T)));
}

}  // namespace swum
