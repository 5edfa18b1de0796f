#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "swum/tensor.hpp"

namespace swum {

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;
};

/// AdamW with decoupled weight decay and per-parameter step counts, so a
/// parameter frozen for a while starts its bias correction fresh when it
/// joins.
class AdamW {
 public:
  AdamW(std::vector<std::pair<std::string, Tensor>> params, AdamWOptions opt = {});

  /// One update at learning rate `lr`. Parameters named in `frozen` are left
  /// bit-identical and their moments untouched. If any other gradient is
  /// non-finite nothing is modified and NumericError names the tensor.
  /// Parameters without a gradient are skipped.
  void step(double lr, const std::set<std::string>& frozen = {});
  void zero_grad();

  std::int64_t steps_of(const std::string& name) const;

 private:
  struct Slot {
    std::string name;
    Tensor param;
    std::vector<double> m, v;
    std::int64_t t = 0;
  };
  std::vector<Slot> slots_;
  AdamWOptions opt_;
};

/// 0.5 * base * (1 + cos(pi * t / T)); 0 for t >= T.
double cosine_lr(double base, std::int64_t t, std::int64_t T);

}  // namespace swum
