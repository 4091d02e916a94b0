#include "moelab/autodiff.hpp"

#include <stdexcept>
#include <unordered_set>

namespace moelab {

Value Value::constant(Tensor t) {
  t.ensure_finite("constant");
  auto node = std::make_shared<Node>();
  node->value = std::move(t);
  node->requires_grad = false;
  return wrap(std::move(node));
}

Value Value::leaf(Tensor t) {
  t.ensure_finite("leaf");
  auto node = std::make_shared<Node>();
  node->value = std::move(t);
  node->requires_grad = true;
  return wrap(std::move(node));
}

void Value::backward() const {
  if (!node_) throw std::runtime_error("backward() on empty value");
  if (node_->value.rows() != 1 || node_->value.cols() != 1) {
    throw std::invalid_argument("backward() requires a scalar value, got " +
                                node_->value.shape_str());
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS over grad-requiring ancestors.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    Node* n = stack.back().first;
    const std::size_t idx = stack.back().second;
    if (idx < n->parents.size()) {
      ++stack.back().second;
      Node* p = n->parents[idx].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->ensure_grad()(0, 0) = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) n->backward(*n);
  }
}

Parameter::Parameter(std::string name, Tensor init) : name_(std::move(name)) {
  init.ensure_finite(name_.c_str());
  node_ = std::make_shared<Node>();
  node_->value = std::move(init);
  node_->requires_grad = true;
  node_->ensure_grad();
}

}  // namespace moelab
