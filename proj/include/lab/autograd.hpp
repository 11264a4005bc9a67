#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "lab/tensor.hpp"

namespace lab {

// One value in a dynamically recorded computation. Non-leaf nodes keep their
// parents alive and a rule that pushes this node's gradient into them.
struct Node {
  Tensor value;
  Tensor grad;  // null until something flows in
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  // Zero-initialised on first use.
  Tensor& grad_buffer();
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var leaf(Tensor value, bool requires_grad = false);

  const Tensor& value() const { return node_->value; }
  // Null tensor if no gradient reached this value.
  const Tensor& grad() const { return node_->grad; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool defined() const noexcept { return static_cast<bool>(node_); }
  void zero_grad();

  const std::shared_ptr<Node>& node() const noexcept { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Creates a result node. When no parent requires a gradient the backward rule
// is dropped and the node is a constant.
Var make_result(Tensor value, const char* op, std::vector<Var> parents, std::function<void(Node&)> backward_fn);

// Reverse sweep from a scalar root; leaf gradients accumulate (+=).
void backward(const Var& root);

}  // namespace lab
