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

#include "dcl/optim.hpp"

#include <algorithm>
#include <cmath>

namespace dcl {

double poly_lr(const OptimizerState& state) {
  if (state.max_iter <= 0) throw std::invalid_argument("poly_lr: max_iter must be positive");
  const double progress = std::clamp(double(state.iter) / double(state.max_iter), 0.0, 1.0);
  return state.base_lr * std::pow(1.0 - progress, state.power);
}

void sgd_update(Tensor& param, const Tensor& grad, Tensor& velocity, double lr, double momentum,
                double weight_decay, const std::string& name) {
  if (!grad.empty() && !grad.same_shape(param)) {
    throw std::invalid_argument("sgd_update: gradient shape mismatch for " + name);
  }
  if (!grad.empty() && !grad.data().allFinite()) {
    throw NonFiniteError("sgd_update: non-finite gradient in " + name);
  }
  if (velocity.empty()) velocity = Tensor::zeros_like(param);
  if (grad.empty()) {
    velocity.data() = momentum * velocity.data() - lr * weight_decay * param.data();
  } else {
    velocity.data() = momentum * velocity.data() - lr * (grad.data() + weight_decay * param.data());
  }
  param.data() += velocity.data();
}

void sgd_step(std::span<ParamRef> params, OptimizerState& state) {
  const double lr = poly_lr(state);
  // Validate everything first so a bad gradient leaves all parameters untouched.
  for (const ParamRef& p : params) {
    if (p.var.has_grad() && !p.var.grad().data().allFinite()) {
      throw NonFiniteError("sgd_step: non-finite gradient in " + p.name);
    }
  }
  for (ParamRef& p : params) {
    Tensor& v = state.velocity[p.name];
    sgd_update(p.var.mutable_value(), p.var.grad(), v, lr * p.lr_mult, state.momentum,
               state.weight_decay, p.name);
    p.var.zero_grad();
  }
  state.iter = std::min(state.iter + 1, state.max_iter);
}

}  // namespace dcl
