#include "futureseg/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <unordered_set>

#include "futureseg/error.hpp"

namespace futureseg {

namespace {

std::atomic<std::uint64_t> next_node_id{1};
thread_local bool recording = true;

}  // namespace

NoGradGuard::NoGradGuard() : previous_(recording) { recording = false; }
NoGradGuard::~NoGradGuard() { recording = previous_; }

bool grad_recording_enabled() { return recording; }

template <typename T>
T* Node<T>::grad_buffer() {
  if (grad.empty() && value.size() != 0) grad = Tensor<T>(value.dims());
  return grad.ptr();
}

template <typename T>
Var<T> Var<T>::parameter(Tensor<T> value) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->requires_grad = true;
  node->id = next_node_id.fetch_add(1);
  return Var(std::move(node));
}

template <typename T>
Var<T> Var<T>::constant(Tensor<T> value) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->id = next_node_id.fetch_add(1);
  return Var(std::move(node));
}

template <typename T>
Var<T> Var<T>::from_op(const char* op, Tensor<T> value, std::vector<std::shared_ptr<Node<T>>> parents,
                       BackwardFn<T> backward) {
  value.check_finite(op);
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->op = op;
  node->id = next_node_id.fetch_add(1);
  const bool needs = recording && std::any_of(parents.begin(), parents.end(),
                                              [](const auto& p) { return p->requires_grad; });
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Var(std::move(node));
}

template <typename T>
void Var<T>::assign(Tensor<T> value) {
  if (!node_->is_leaf()) throw Error("assign() on a non-leaf node");
  if (value.dims() != node_->value.dims()) {
    throw ShapeError("assign() changes dims " + node_->value.dims().str() + " -> " +
                     value.dims().str());
  }
  node_->value = std::move(value);
}

template <typename T>
Tensor<T> GradientSet<T>::of(const Var<T>& v) const {
  auto it = grads_.find(v.id());
  if (it == grads_.end()) return Tensor<T>(v.dims());
  return it->second;
}

template <typename T>
GradientSet<T> backward(const Var<T>& loss) {
  if (!loss.defined() || loss.dims().count() != 1) {
    throw ShapeError("backward() needs a scalar loss");
  }
  GradientSet<T> out;
  if (!loss.requires_grad()) return out;

  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<Node<T>*> stack{loss.node().get()};
  seen.insert(stack.back());
  while (!stack.empty()) {
    Node<T>* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  std::sort(order.begin(), order.end(), [](const Node<T>* a, const Node<T>* b) { return a->id > b->id; });

  loss.node()->grad_buffer()[0] = T(1);
  for (Node<T>* n : order) {
    if (n->is_leaf()) continue;
    if (!n->backward) {
      throw Error(std::string("graph node '") + n->op + "' has no recorded backward rule");
    }
    if (n->grad.empty()) continue;
    n->backward(*n);
  }
  for (Node<T>* n : order) {
    if (n->is_leaf() && !n->grad.empty()) out.insert(n->id, std::move(n->grad));
    n->grad = Tensor<T>();
  }
  return out;
}

template struct Node<float>;
template struct Node<double>;
template class Var<float>;
template class Var<double>;
template class GradientSet<float>;
template class GradientSet<double>;
template GradientSet<float> backward(const Var<float>&);
template GradientSet<double> backward(const Var<double>&);

}  // namespace futureseg
