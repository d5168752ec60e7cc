#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "codemix/neural/tensor.hpp"

namespace codemix::nn {

/// A value in the computation graph. Gradients are allocated lazily.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Tensor& ensure_grad() {
    if (grad.size() != value.size()) grad = Tensor::zeros_like(value);
    return grad;
  }
};

/// Shared handle to a graph node.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var constant(Tensor value);
  /// Leaf that accumulates gradients (a trainable parameter).
  static Var leaf(Tensor value, bool requires_grad = true);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  Tensor& mutable_grad() { return node_->ensure_grad(); }
  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  void zero_grad() {
    if (!node_->grad.empty()) node_->grad.fill(0.0);
  }
  const Shape& shape() const { return node_->value.shape(); }
  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Builds an op result. The backward closure is kept only when some parent
/// needs a gradient and graph recording is enabled.
Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward);

/// Reverse-mode sweep from a scalar root (seeded with d root = 1).
void backward(const Var& root);

/// RAII switch that stops graph recording (inference, finite differences).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

}  // namespace codemix::nn
