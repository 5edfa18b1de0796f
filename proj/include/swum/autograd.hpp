#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "swum/tensor.hpp"

namespace swum {

/// Gradient rule of one recorded op. Receives the op output and the gradient
/// flowing into it; returns one gradient per input (undefined = no
/// contribution). The engine adds the results into the inputs' gradients.
using BackwardFn = std::function<std::vector<Tensor>(const Tensor& out, const Tensor& grad_out)>;

struct Node {
  std::uint64_t seq = 0;  // creation order; the tape is replayed in reverse
  std::string_view op;
  std::vector<Tensor> inputs;
  BackwardFn backward;
};

bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// True when grad mode is on and at least one input participates in the tape.
bool needs_grad(std::initializer_list<const Tensor*> inputs);
bool needs_grad(const std::vector<Tensor>& inputs);

/// Attaches a tape node to `out` when any input requires grad and grad mode
/// is on. Returns `out`.
Tensor record(Tensor out, std::string_view op, std::vector<Tensor> inputs, BackwardFn fn);

/// Reverse-mode sweep from a single-element loss. Gradients accumulate into
/// every reachable leaf with requires_grad; the graph is retained, so a second
/// call without zero_grad() doubles the stored gradients.
void backward(const Tensor& loss);

/// Number of nodes reachable from `t` (diagnostics and tests).
std::size_t tape_size(const Tensor& t);

}  // namespace swum
