#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <stdexcept>
#include <vector>

#include "ttmr/tensor.hpp"

namespace ttmr::ad {

/// Handle to a value recorded on a Graph.
struct Var {
  static constexpr std::uint32_t kInvalid = std::numeric_limits<std::uint32_t>::max();
  std::uint32_t id = kInvalid;
  bool valid() const noexcept { return id != kInvalid; }
};

/// Reverse-mode tape.
///
/// Nodes are appended in evaluation order, so walking the tape backwards from the loss is a valid
/// reverse topological order. Gradients accumulate additively. A graph supports a single backward
/// pass; record and backward must not run concurrently on the same instance.
template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor<T>& grad_out)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) noexcept = default;
  Graph& operator=(Graph&&) noexcept = default;

  Var constant(Tensor<T> value) { return push(std::move(value), false, nullptr, {}); }

  /// Leaf whose gradient is retained and readable through grad() after backward().
  Var variable(Tensor<T> value) { return push(std::move(value), true, nullptr, {}); }

  /// Leaf whose gradient is added into `grad_sink` (same shape as value) during backward().
  Var parameter(const Tensor<T>& value, Tensor<T>* grad_sink) {
    if (grad_sink != nullptr && grad_sink->shape() != value.shape()) {
      throw ShapeError("parameter gradient sink shape " + shape_str(grad_sink->shape()) + " != " +
                       shape_str(value.shape()));
    }
    return push(value, true, grad_sink, {});
  }

  /// Appends the result of an operation. `fn` is kept only when some input requires a gradient.
  Var record(Tensor<T> value, std::initializer_list<Var> inputs, BackwardFn fn) {
    bool needs = false;
    for (Var v : inputs) needs = needs || requires_grad(v);
    return push(std::move(value), needs, nullptr, needs ? std::move(fn) : BackwardFn{});
  }

  const Tensor<T>& value(Var v) const { return node(v).value; }
  bool requires_grad(Var v) const { return node(v).requires_grad; }

  /// Gradient of the loss w.r.t. a leaf variable; zero tensor when nothing flowed into it.
  Tensor<T> grad(Var v) const {
    const Node& n = node(v);
    if (n.grad.empty()) return Tensor<T>(n.value.shape());
    return n.grad;
  }

  /// Zero-initialised gradient buffer that backward functions accumulate into.
  Tensor<T>& grad_buffer(Var v) {
    Node& n = node(v);
    if (n.grad.empty()) n.grad = Tensor<T>(n.value.shape());
    return n.grad;
  }

  void accumulate(Var v, const Tensor<T>& g) {
    if (!requires_grad(v)) return;
    Tensor<T>& buf = grad_buffer(v);
    if (buf.shape() != g.shape()) throw ShapeError("gradient shape mismatch during accumulation");
    for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
  }

  /// Runs reverse accumulation from a scalar `loss`, scaled by `seed`.
  void backward(Var loss, T seed = T{1}) {
    if (backward_done_) throw std::logic_error("Graph::backward may only run once");
    backward_done_ = true;
    Node& root = node(loss);
    if (root.value.size() != 1) {
      throw ShapeError("backward requires a scalar loss, got " + shape_str(root.value.shape()));
    }
    if (!root.requires_grad) return;
    grad_buffer(loss)[0] += seed;
    for (std::int64_t i = loss.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.grad.empty()) continue;
      if (n.backward) {
        n.backward(*this, n.grad);
        n.backward = nullptr;
        n.grad = Tensor<T>();
      } else if (n.sink != nullptr) {
        for (std::size_t k = 0; k < n.grad.size(); ++k) (*n.sink)[k] += n.grad[k];
      }
    }
  }

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    Tensor<T>* sink = nullptr;
    BackwardFn backward;
  };

  Var push(Tensor<T> value, bool requires_grad, Tensor<T>* sink, BackwardFn fn) {
    if (nodes_.size() >= Var::kInvalid) throw std::length_error("graph too large");
    nodes_.push_back(Node{std::move(value), Tensor<T>(), requires_grad, sink, std::move(fn)});
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  Node& node(Var v) {
    if (v.id >= nodes_.size()) throw std::out_of_range("invalid graph variable");
    return nodes_[v.id];
  }
  const Node& node(Var v) const {
    if (v.id >= nodes_.size()) throw std::out_of_range("invalid graph variable");
    return nodes_[v.id];
  }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace ttmr::ad
