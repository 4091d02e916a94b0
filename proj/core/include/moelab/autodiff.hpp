#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "moelab/tensor.hpp"

namespace moelab {

/// One record of the differentiation tape: the forward value, the gradient
/// buffer, and a backward rule that pulls this node's gradient into its
/// parents. Saved forward intermediates live in the backward closure.
struct Node {
  Tensor value;
  Tensor grad;  // sized lazily on first accumulation
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Tensor& ensure_grad() {
    if (grad.rows() != value.rows() || grad.cols() != value.cols()) {
      grad = Tensor(value.rows(), value.cols());
    }
    return grad;
  }
};

/// Shared handle to a tape node. Cheap to copy; the graph is immutable once
/// built and freed when the last handle goes away.
class Value {
 public:
  Value() = default;

  /// Non-differentiable input; rejected if non-finite.
  static Value constant(Tensor t);
  /// Differentiable leaf (used by Parameter and by gradient-check probes).
  static Value leaf(Tensor t);

  bool defined() const { return node_ != nullptr; }
  const Tensor& val() const { return node_->value; }
  Tensor& grad() const { return node_->ensure_grad(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const std::shared_ptr<Node>& node() const { return node_; }

  /// Reverse pass from a scalar (1x1) value: topological order over the
  /// tape, then each backward rule in reverse. Gradients accumulate; callers
  /// zero parameter gradients between passes.
  void backward() const;

  static Value wrap(std::shared_ptr<Node> node) {
    Value v;
    v.node_ = std::move(node);
    return v;
  }

 private:
  std::shared_ptr<Node> node_;
};

/// Named trainable tensor: a persistent leaf node, shared between the model
/// that owns it and the graphs built on top of it each step.
class Parameter {
 public:
  Parameter() = default;
  Parameter(std::string name, Tensor init);

  const std::string& name() const { return name_; }
  Value value() const { return Value::wrap(node_); }
  Tensor& tensor() { return node_->value; }
  const Tensor& tensor() const { return node_->value; }
  Tensor& grad() { return node_->ensure_grad(); }
  void zero_grad() { node_->ensure_grad().fill(0.0); }
  std::size_t size() const { return node_->value.size(); }

 private:
  std::string name_;
  std::shared_ptr<Node> node_;
};

}  // namespace moelab
