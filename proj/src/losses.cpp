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

#include "dcl/losses.hpp"

#include <algorithm>
#include <cmath>

namespace dcl {

double class_balance_weight(const Tensor& gt) {
  if (gt.empty()) throw std::invalid_argument("class_balance_weight: empty map");
  const double negatives = double((gt.data() < 0.5).count());
  return std::clamp(negatives / double(gt.size()), kBetaClamp, 1.0 - kBetaClamp);
}

Var balanced_bce_loss(const Var& pred, const Tensor& gt) {
  if (!pred.value().same_shape(gt)) {
    throw std::invalid_argument("balanced_bce_loss: prediction " + shape_str(pred.dims()) +
                                " vs ground truth " + shape_str(gt.dims()));
  }
  const double beta = class_balance_weight(gt);
  const auto& p = pred.value().data();
  double loss = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p[i], kProbClamp, 1.0 - kProbClamp);
    loss -= gt[i] >= 0.5 ? beta * std::log(q) : (1.0 - beta) * std::log(1.0 - q);
  }
  return Var::from_op(Tensor({1}, loss), {pred}, [gt, beta](Var::Node& node) {
    auto& in = *node.parents[0];
    Tensor& d = in.grad_buffer();
    const double g = node.grad[0];
    for (Index i = 0; i < d.size(); ++i) {
      const double v = in.value[i];
      if (v < kProbClamp || v > 1.0 - kProbClamp) continue;
      d[i] += gt[i] >= 0.5 ? -g * beta / v : g * (1.0 - beta) / (1.0 - v);
    }
  });
}

Var squared_error_loss(const Var& pred, const Tensor& labels) {
  if (pred.size() != labels.size()) {
    throw std::invalid_argument("squared_error_loss: " + std::to_string(pred.size()) +
                                " predictions vs " + std::to_string(labels.size()) + " labels");
  }
  const Eigen::ArrayXd diff = pred.value().data() - labels.data();
  return Var::from_op(Tensor({1}, diff.square().sum()), {pred}, [diff](Var::Node& node) {
    node.parents[0]->grad_buffer().data() += 2.0 * node.grad[0] * diff;
  });
}

}  // namespace dcl
