// Copyright 2026 The Voxage Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Tape-free reverse-mode autodiff. Every operator returns a Var whose node
// remembers its inputs and a closure that pushes the node's gradient back to
// them; backward() walks the graph in reverse topological order.

#ifndef VOXAGE_NN_AUTOGRAD_HPP_
#define VOXAGE_NN_AUTOGRAD_HPP_

#include <algorithm>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "voxage/nn/tensor.hpp"

namespace voxage::nn {

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Tensor<T>& grad_buffer() {
    if (grad.size() != value.size()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(Tensor<T> value, bool requires_grad = false)
      : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  bool defined() const { return node_ != nullptr; }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }

  /// Gradient accumulated so far (zeros if none reached this node).
  const Tensor<T>& grad() const { return node_->grad_buffer(); }
  Tensor<T>& mutable_grad() { return node_->grad_buffer(); }
  void zero_grad() { node_->grad_buffer().fill(T(0)); }

  /// Same value, cut from the graph.
  Var detach() const { return Var(node_->value, false); }

  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Builds an operator output. `backward` runs only if some input needs a
/// gradient; otherwise the node is a constant and keeps no references.
template <typename T>
Var<T> make_result(Tensor<T> value, std::initializer_list<const Var<T>*> inputs,
                   std::function<void(Node<T>&)> backward) {
  bool needs = false;
  for (const Var<T>* in : inputs) needs = needs || in->requires_grad();
  Var<T> out(std::move(value), needs);
  if (needs) {
    auto& node = *out.node();
    for (const Var<T>* in : inputs) node.parents.push_back(in->node());
    node.backward = std::move(backward);
  }
  return out;
}

/// Seeds d(root)/d(root) = 1 (root must be a single element) and
/// propagates gradients into every reachable node that requires them.
template <typename T>
void backward(const Var<T>& root) {
  if (root.value().size() != 1) {
    fail(ErrorCode::kDimension, "backward: root must be a scalar");
  }
  if (!root.requires_grad()) return;

  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  // Iterative post-order DFS.
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backward) node->backward(*node);
  }
}

template <typename T>
struct Parameter {
  std::string name;
  Var<T> var;
  bool trainable = true;

  Tensor<T>& value() { return var.mutable_value(); }
  const Tensor<T>& value() const { return var.value(); }
  Tensor<T>& grad() { return var.mutable_grad(); }
};

/// Owns named parameters with stable addresses, in insertion order.
template <typename T>
class ParameterStore {
 public:
  Parameter<T>* add(const std::string& name, Tensor<T> value,
                    bool trainable = true) {
    if (find(name) != nullptr) {
      fail(ErrorCode::kState, "parameter '" + name + "' already exists");
    }
    auto p = std::make_unique<Parameter<T>>();
    p->name = name;
    p->var = Var<T>(std::move(value), trainable);
    p->trainable = trainable;
    params_.push_back(std::move(p));
    return params_.back().get();
  }

  Parameter<T>* find(const std::string& name) const {
    for (const auto& p : params_) {
      if (p->name == name) return p.get();
    }
    return nullptr;
  }

  Parameter<T>& at(const std::string& name) const {
    Parameter<T>* p = find(name);
    if (p == nullptr) fail(ErrorCode::kState, "no parameter '" + name + "'");
    return *p;
  }

  std::vector<Parameter<T>*> all() const {
    std::vector<Parameter<T>*> out;
    for (const auto& p : params_) out.push_back(p.get());
    return out;
  }

  /// Trainable parameters whose names start with `prefix`.
  std::vector<Parameter<T>*> trainable(const std::string& prefix = "") const {
    std::vector<Parameter<T>*> out;
    for (const auto& p : params_) {
      if (p->trainable && p->name.rfind(prefix, 0) == 0) out.push_back(p.get());
    }
    return out;
  }

  void zero_grad() {
    for (auto& p : params_) {
      if (p->trainable) p->var.zero_grad();
    }
  }

  std::size_t size() const { return params_.size(); }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
};

}  // namespace voxage::nn

#endif  // VOXAGE_NN_AUTOGRAD_HPP_
