#include "swum/autograd.hpp"

#include <algorithm>
#include <atomic>
#include <unordered_map>
#include <unordered_set>

namespace swum {

namespace {

thread_local bool g_grad_enabled = true;
std::atomic<std::uint64_t> g_next_seq{1};

void accumulate_into(std::shared_ptr<detail::TensorImpl>& slot, const Tensor& g, const Tensor& like) {
  if (g.shape() != like.shape())
    throw DimensionError("gradient shape " + shape_str(g.shape()) + " does not match " + shape_str(like.shape()));
  if (g.dtype() != like.dtype()) throw DimensionError("gradient dtype does not match its tensor");
  if (!slot) {
    slot = g.clone().impl();
    return;
  }
  dispatch_float(g.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto& dst = std::get<std::vector<T>>(slot->data);
    auto src = g.data<T>();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  });
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool needs_grad(std::initializer_list<const Tensor*> inputs) {
  if (!g_grad_enabled) return false;
  for (const auto* t : inputs)
    if (t && t->defined() && t->requires_grad()) return true;
  return false;
}

bool needs_grad(const std::vector<Tensor>& inputs) {
  if (!g_grad_enabled) return false;
  for (const auto& t : inputs)
    if (t.defined() && t.requires_grad()) return true;
  return false;
}

Tensor record(Tensor out, std::string_view op, std::vector<Tensor> inputs, BackwardFn fn) {
  if (!needs_grad(inputs)) return out;
  auto node = std::make_shared<Node>();
  node->seq = g_next_seq.fetch_add(1);
  node->op = op;
  node->inputs = std::move(inputs);
  node->backward = std::move(fn);
  out.impl()->grad_fn = std::move(node);
  return out;
}

namespace {

std::vector<Tensor> collect_nonleaves(const Tensor& root) {
  std::vector<Tensor> found;
  std::unordered_set<const detail::TensorImpl*> seen;
  std::vector<Tensor> stack{root};
  while (!stack.empty()) {
    Tensor t = std::move(stack.back());
    stack.pop_back();
    if (!t.impl()->grad_fn || !seen.insert(t.impl().get()).second) continue;
    found.push_back(t);
    for (const auto& in : t.impl()->grad_fn->inputs)
      if (in.defined() && in.impl()->grad_fn) stack.push_back(in);
  }
  std::sort(found.begin(), found.end(),
            [](const Tensor& a, const Tensor& b) { return a.impl()->grad_fn->seq > b.impl()->grad_fn->seq; });
  return found;
}

}  // namespace

void backward(const Tensor& loss) {
  if (!loss.defined()) throw Error("backward on undefined tensor");
  if (loss.numel() != 1) throw DimensionError("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
  if (!loss.requires_grad()) throw Error("backward: loss is not on the tape");

  Tensor seed = Tensor::ones(loss.shape(), loss.dtype());
  if (loss.is_leaf()) {
    accumulate_into(loss.impl()->grad, seed, loss);
    return;
  }

  std::unordered_map<const detail::TensorImpl*, std::shared_ptr<detail::TensorImpl>> pending;
  pending[loss.impl().get()] = seed.impl();

  for (const Tensor& t : collect_nonleaves(loss)) {
    auto it = pending.find(t.impl().get());
    if (it == pending.end()) continue;
    Tensor gout(it->second);
    pending.erase(it);
    Node& node = *t.impl()->grad_fn;
    std::vector<Tensor> gins = node.backward(t, gout);
    if (gins.size() != node.inputs.size()) throw Error("backward rule of '" + std::string(node.op) + "' returned wrong arity");
    for (std::size_t i = 0; i < gins.size(); ++i) {
      const Tensor& in = node.inputs[i];
      if (!gins[i].defined() || !in.defined() || !in.requires_grad()) continue;
      if (in.is_leaf()) {
        accumulate_into(in.impl()->grad, gins[i], in);
      } else {
        accumulate_into(pending[in.impl().get()], gins[i], in);
      }
    }
  }
}

std::size_t tape_size(const Tensor& t) { return collect_nonleaves(t).size(); }

}  // namespace swum
