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

#include "dcl/autograd.hpp"

#include <map>
#include <span>
#include <stdexcept>
#include <string>

namespace dcl {

struct OptimizerState {
  double base_lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  double power = 0.9;
  long max_iter = 1;
  long iter = 0;
  std::map<std::string, Tensor> velocity;
};

/// "poly" schedule: base_lr * (1 - iter / max_iter)^power.
double poly_lr(const OptimizerState& state);

struct ParamRef {
  std::string name;
  Var var;
  double lr_mult = 1.0;
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Momentum SGD on one tensor:
///   velocity = momentum * velocity - lr * (grad + weight_decay * param)
///   param += velocity
/// Throws NonFiniteError if grad holds a NaN or infinity.
void sgd_update(Tensor& param, const Tensor& grad, Tensor& velocity, double lr, double momentum,
                double weight_decay, const std::string& name = "param");

/// One step over every parameter at poly_lr(state) * lr_mult, then advances
/// `state.iter` (saturating at max_iter) and clears the gradients.
void sgd_step(std::span<ParamRef> params, OptimizerState& state);

}  // namespace dcl
