#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "segfuse/errors.hpp"

namespace segfuse {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (const std::size_t d : shape) n *= d;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // sized lazily during backward
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  // Reads this->grad and accumulates into the parents' grad buffers.
  std::function<void(TensorNode&)> backprop;

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
};

inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

/// RAII scope that disables graph recording (pure inference).
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode_flag()) {
    detail::grad_mode_flag() = false;
  }
  ~NoGradGuard() { detail::grad_mode_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

inline bool grad_enabled() { return detail::grad_mode_flag(); }

/// Dense row-major float64 tensor with reverse-mode differentiation.
///
/// A Tensor is an immutable value handle: operations return fresh tensors and
/// retain the graph needed for backward(). Leaves created with
/// requires_grad=true accumulate gradients across backward passes until
/// zero_grad() is called.
class Tensor {
 public:
  Tensor() = default;

  static Tensor from_data(Shape shape, std::vector<double> values,
                          bool requires_grad = false) {
    if (shape_size(shape) != values.size())
      throw DimensionError("tensor data length " + std::to_string(values.size()) +
                           " does not match shape " + shape_str(shape));
    auto node = std::make_shared<detail::TensorNode>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    node->requires_grad = requires_grad && grad_enabled();
    return Tensor(std::move(node));
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    std::vector<double> v(shape_size(shape), 0.0);
    return from_data(std::move(shape), std::move(v), requires_grad);
  }

  static Tensor full(Shape shape, double value, bool requires_grad = false) {
    std::vector<double> v(shape_size(shape), value);
    return from_data(std::move(shape), std::move(v), requires_grad);
  }

  static Tensor scalar(double value, bool requires_grad = false) {
    return from_data({1}, {value}, requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->values.size(); }
  const std::vector<double>& values() const { return node_->values; }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  /// In-place access for optimizers and deserialization. Only sensible on
  /// leaves; ops that already consumed this tensor keep their own outputs.
  std::vector<double>& mutable_values() { return node_->values; }

  double operator()(std::size_t i) const { return node_->values[i]; }
  double operator()(std::size_t i, std::size_t j) const {
    return node_->values[i * node_->shape[1] + j];
  }

  double item() const {
    if (size() != 1)
      throw DimensionError("item() on tensor of shape " + shape_str(shape()));
    return node_->values[0];
  }

  bool all_finite() const {
    for (const double v : node_->values)
      if (!std::isfinite(v)) return false;
    return true;
  }

  /// Gradient buffer (empty until a backward pass reached this tensor).
  const std::vector<double>& grad() const {
    static const std::vector<double> empty;
    return node_->grad.empty() ? empty : node_->grad;
  }

  void zero_grad() const {
    if (node_) node_->grad.clear();
  }

  /// Constant view of the same values, detached from the graph.
  Tensor detach() const {
    auto node = std::make_shared<detail::TensorNode>();
    node->shape = node_->shape;
    node->values = node_->values;
    node->requires_grad = false;
    return Tensor(std::move(node));
  }

  void backward() const {
    if (size() != 1)
      throw DimensionError("backward() without seed requires a scalar, got " +
                           shape_str(shape()));
    backward(std::vector<double>{1.0});
  }

  /// Reverse-mode pass seeded with d(out)/d(out) = seed. Accumulates into the
  /// grad buffers of every tensor in this graph that requires grad.
  void backward(const std::vector<double>& seed) const {
    if (!node_->requires_grad)
      throw InvalidInputError("backward() on a tensor that does not require grad");
    if (seed.size() != size())
      throw DimensionError("backward seed length " + std::to_string(seed.size()) +
                           " does not match tensor of shape " + shape_str(shape()));

    // Iterative post-order DFS; reversed, it yields every node before any of
    // its parents, so grads are fully accumulated before propagation.
    std::vector<detail::TensorNode*> order;
    std::unordered_set<detail::TensorNode*> visited;
    struct Frame {
      detail::TensorNode* node;
      std::size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({node_.get(), 0});
    visited.insert(node_.get());
    while (!stack.empty()) {
      Frame& frame = stack.back();
      if (frame.next_parent < frame.node->parents.size()) {
        detail::TensorNode* parent = frame.node->parents[frame.next_parent++].get();
        if (parent->requires_grad && visited.insert(parent).second)
          stack.push_back({parent, 0});
      } else {
        order.push_back(frame.node);
        stack.pop_back();
      }
    }
    // Interior (op-result) grads are scratch space for this pass; only leaves
    // accumulate across passes.
    for (detail::TensorNode* node : order)
      if (node->backprop) node->grad.assign(node->values.size(), 0.0);

    node_->ensure_grad();
    for (std::size_t i = 0; i < seed.size(); ++i) node_->grad[i] += seed[i];

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      detail::TensorNode* node = *it;
      if (node->backprop) {
        node->ensure_grad();
        node->backprop(*node);
      }
    }
  }

  std::shared_ptr<detail::TensorNode> node() const { return node_; }

  explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

namespace detail {

/// Builds an op result node. Parents and the backprop closure are retained
/// only when the result participates in a gradient.
inline Tensor make_op(Shape shape, std::vector<double> values,
                      std::vector<Tensor> parents,
                      std::function<void(TensorNode&)> backprop) {
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  bool needs = false;
  if (grad_enabled())
    for (const Tensor& p : parents)
      if (p.requires_grad()) needs = true;
  node->requires_grad = needs;
  if (needs) {
    node->parents.reserve(parents.size());
    for (const Tensor& p : parents) node->parents.push_back(p.node());
    node->backprop = std::move(backprop);
  }
  return Tensor(std::move(node));
}

inline void accumulate(const std::shared_ptr<TensorNode>& node,
                       std::size_t index, double amount) {
  if (!node->requires_grad) return;
  node->ensure_grad();
  node->grad[index] += amount;
}

}  // namespace detail

}  // namespace segfuse
