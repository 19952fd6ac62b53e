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

#include <vector>

namespace dcl {

/// Geometry of a 2-D convolution. `dilation` is the tap spacing r: output
/// position i reads input positions i*stride - padding + r*k.
struct ConvSpec {
  Index in_channels = 1;
  Index out_channels = 1;
  Index kernel_h = 1;
  Index kernel_w = 1;
  Index stride = 1;
  Index dilation = 1;
  Index padding = 0;

  /// Padding that keeps H_out = ceil(H_in / stride) for odd kernels.
  static Index same_padding(Index kernel, Index dilation) { return dilation * (kernel - 1) / 2; }

  void validate() const;
  Index output_size(Index input, Index kernel) const;
  Index out_h(Index h) const { return output_size(h, kernel_h); }
  Index out_w(Index w) const { return output_size(w, kernel_w); }
  Shape weight_dims() const { return {out_channels, in_channels, kernel_h, kernel_w}; }
};

// -- Plain tensor kernels (no graph) ----------------------------------------

Tensor conv2d_forward(const Tensor& input, const ConvSpec& spec, const Tensor& weight,
                      const Tensor& bias);
Tensor bilinear_resize(const Tensor& input, Index out_h, Index out_w);
/// Mean over non-overlapping factor x factor blocks; H and W must divide.
Tensor area_downsample(const Tensor& input, Index factor);
Tensor flip_horizontal(const Tensor& input);

// -- Differentiable operations ----------------------------------------------

Var dilated_conv2d(const Var& input, const ConvSpec& spec, const Var& weight, const Var& bias);
/// Max pooling with implicit -inf padding. Gradient goes to the first
/// (row-major) maximal element of each window.
Var max_pool2d(const Var& input, Index window, Index stride, Index padding = 0);
Var relu(const Var& x);
Var sigmoid(const Var& x);
/// Softmax across axis 1 of an NCHW tensor at every (n, h, w).
Var softmax_channels(const Var& x);
/// Half-pixel-centre bilinear interpolation of the two trailing axes.
Var bilinear_resize(const Var& x, Index out_h, Index out_w);
/// Concatenates NCHW tensors along the channel axis.
Var stack_channels(const std::vector<Var>& inputs);
Var channel(const Var& x, Index c);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& x, double factor);
Var sum(const Var& x);
Var reshape(const Var& x, Shape dims);
/// y = x * W^T + b with x [n, in], W [out, in], b [out].
Var linear(const Var& x, const Var& weight, const Var& bias);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(double s, const Var& x) { return scale(x, s); }

}  // namespace dcl
