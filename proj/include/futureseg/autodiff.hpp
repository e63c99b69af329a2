#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <vector>

#include "futureseg/tensor.hpp"

namespace futureseg {

template <typename T>
struct Node;

// Backward rule: reads self.grad, accumulates into parents' gradient buffers.
template <typename T>
using BackwardFn = std::function<void(Node<T>& self)>;

// One recorded value in the computation graph.
template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // empty until backward touches this node
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn<T> backward;
  const char* op = "leaf";
  bool requires_grad = false;
  std::uint64_t id = 0;  // creation order; parents always have smaller ids

  bool is_leaf() const { return parents.empty(); }
  // Gradient buffer, zero-filled on first use.
  T* grad_buffer();
};

// Handle to a graph node. Cheap to copy; copies share the node.
template <typename T>
class Var {
 public:
  Var() = default;

  // Trainable leaf.
  static Var parameter(Tensor<T> value);
  // Non-trainable leaf.
  static Var constant(Tensor<T> value);

  // Result of an op. When recording is off or no parent requires a gradient,
  // parents and the backward rule are dropped.
  static Var from_op(const char* op, Tensor<T> value, std::vector<std::shared_ptr<Node<T>>> parents,
                     BackwardFn<T> backward);

  bool defined() const { return node_ != nullptr; }
  const Tensor<T>& value() const { return node_->value; }
  const Dims& dims() const { return node_->value.dims(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  std::uint64_t id() const { return node_->id; }
  const char* op() const { return node_->op; }
  const std::shared_ptr<Node<T>>& node() const { return node_; }

  // Replaces a leaf's value (optimizer updates). Dims must not change.
  void assign(Tensor<T> value);

 private:
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}
  std::shared_ptr<Node<T>> node_;
};

// Gradients of trainable leaves, keyed by node id.
template <typename T>
class GradientSet {
 public:
  void insert(std::uint64_t id, Tensor<T> grad) { grads_[id] = std::move(grad); }
  bool contains(const Var<T>& v) const { return grads_.count(v.id()) != 0; }
  // Gradient of `v`; zeros of v's dims when v did not influence the loss.
  Tensor<T> of(const Var<T>& v) const;
  std::size_t size() const { return grads_.size(); }

 private:
  std::map<std::uint64_t, Tensor<T>> grads_;
};

// Reverse-mode sweep from a scalar (1x1x1x1) loss. Nodes are visited in
// decreasing creation order, so accumulation order is deterministic.
template <typename T>
GradientSet<T> backward(const Var<T>& loss);

// Disables graph recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_recording_enabled();

extern template struct Node<float>;
extern template struct Node<double>;
extern template class Var<float>;
extern template class Var<double>;
extern template class GradientSet<float>;
extern template class GradientSet<double>;

}  // namespace futureseg
