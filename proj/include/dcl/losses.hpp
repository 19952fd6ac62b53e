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

namespace dcl {

inline constexpr double kProbClamp = 1e-7;
inline constexpr double kBetaClamp = 1e-6;

/// Fraction of negative (zero) pixels in a binary map, clamped away from
/// 0 and 1 so single-class maps keep both terms finite.
double class_balance_weight(const Tensor& gt);

/// Class-balanced binary cross-entropy summed over all pixels:
///   -beta * sum_{gt=1} log p - (1 - beta) * sum_{gt=0} log(1 - p)
/// with beta = |negatives| / |pixels| of this map. Predictions are clamped
/// to [1e-7, 1 - 1e-7]; clamped entries receive no gradient.
Var balanced_bce_loss(const Var& pred, const Tensor& gt);

/// sum_i (pred_i - label_i)^2 over equally sized tensors.
Var squared_error_loss(const Var& pred, const Tensor& labels);

}  // namespace dcl
