#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "swum/model.hpp"

namespace swum {

struct GradcheckResult {
  std::string name;
  double max_rel_err = 0;
  std::int64_t checked = 0;
  double tol = 1e-4;
  bool passed() const { return checked > 0 && max_rel_err < tol; }
};

using GradFn = std::function<Tensor(const std::vector<Tensor>&)>;

/// Uniform f64 tensor in [lo, hi).
Tensor rand_uniform(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0);

/// Compares tape gradients of L = sum(r * f(inputs)), r random, against
/// central differences with step h on up to `per_input` entries of every
/// floating input. Relative error is |a - n| / max(|a|, |n|, 1e-3).
GradcheckResult gradcheck(const std::string& name, const GradFn& f, std::vector<Tensor> inputs, std::uint64_t seed,
                          std::int64_t per_input = 24, double h = 1e-5, double tol = 1e-4);

/// Every differentiable op and layer on small random f64 inputs.
std::vector<GradcheckResult> run_op_suite(std::uint64_t seed);

/// Tiny network at f64: L = sum over heads of r_l * y_l, checked on
/// `samples` randomly chosen parameter entries from distinct tensors.
GradcheckResult run_network_check(Variant v, std::uint64_t seed, int samples = 30, std::int64_t input_size = 32,
                                  double tol = 1e-3);

}  // namespace swum
