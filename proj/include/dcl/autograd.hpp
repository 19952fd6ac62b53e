/* Copyright 2026 The dcl Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include "dcl/tensor.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace dcl {

/// A tensor participating in reverse-mode differentiation.
///
/// Var is a shared handle: copies alias the same node. Leaves created with
/// `parameter` accumulate gradients across `backward` calls until
/// `zero_grad`. Results of operations whose inputs are all constants do not
/// record a graph.
class Var {
 public:
  struct Node {
    Tensor value;
    Tensor grad;  // empty until something flows into it
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    Tensor& grad_buffer() {
      if (grad.empty()) grad = Tensor::zeros_like(value);
      return grad;
    }
  };

  Var() = default;

  static Var constant(Tensor value) { return Var(std::move(value), false); }
  static Var parameter(Tensor value) { return Var(std::move(value), true); }

  /// Result of an operation over `parents`. `backward` receives the result
  /// node and must add into the parents' grad buffers.
  static Var from_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward);

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& dims() const { return node_->value.dims(); }
  Index dim(Index axis) const { return node_->value.dim(axis); }
  Index size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  const Tensor& grad() const { return node_->grad; }
  Node& node() const { return *node_; }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

  /// The value with a fresh identity and no history.
  Var detach() const { return constant(node_->value); }

  void zero_grad() { node_->grad = Tensor(); }

  /// Back-propagates from this node. The seed defaults to ones, so a scalar
  /// loss gets d(loss)/d(loss) = 1.
  void backward() const;
  void backward(const Tensor& seed) const;

 private:
  Var(Tensor value, bool requires_grad);
  std::shared_ptr<Node> node_;
};

/// While alive, ops on this thread record no graph: results are constants.
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

}  // namespace dcl
