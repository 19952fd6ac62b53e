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

#include "dcl/msfcn.hpp"

#include <cstdint>
#include <string>

namespace dcl {

/// Pixel-wise weights for the two streams at 1/8 resolution; W1 + W2 = 1.
struct AttentionWeights {
  Var w1;  // [1,1,h,w]
  Var w2;  // [1,1,h,w]
};

enum class FusionMode { kAttention, kAverage, kConv1x1 };

FusionMode parse_fusion_mode(const std::string& name);
std::string fusion_mode_name(FusionMode mode);

/// "attn.conv1": 3x3, C -> hidden, pad 1. "attn.conv2": 1x1, hidden -> 2,
/// zero-initialised.
std::vector<LayerDesc> attention_layers(Index in_channels, Index hidden, const std::string& prefix = "attn.");
WeightStore build_attention(Index in_channels, Index hidden, std::uint64_t seed,
                            const std::string& prefix = "attn.");

/// conv1 -> ReLU -> conv2 -> channel softmax.
AttentionWeights attention_forward(const Var& features, const WeightStore& weights,
                                   const std::string& prefix = "attn.");

/// Constant 0.5 / 0.5 weights shaped like `like`.
AttentionWeights average_weights(const Var& like);

/// S = W1 * S1 + W2 * S2 at the resolution of the inputs.
Var fuse_low(const Var& s1_low, const Var& s2_low, const AttentionWeights& weights);

/// fuse_low followed by bilinear upsampling to out_h x out_w.
Var fuse_saliency(const Var& s1_low, const Var& s2_low, const AttentionWeights& weights, Index out_h,
                  Index out_w);

/// Upsamples S1 and both weight maps bilinearly to S2's size, then fuses
/// there. Bilinear taps are convex, so W1 + W2 = 1 survives upsampling.
Var fuse_saliency_full(const Var& s1_low, const Var& s2, const AttentionWeights& weights);

/// Learned 1x1 fusion sigmoid(a * S1 + b * S2 + c), parameters "fuse1x1.weight" [1,2,1,1]
/// and "fuse1x1.bias" [1]; initialised to a = b = 6, c = -6.
WeightStore build_conv_fusion(const std::string& prefix = "fuse1x1.");
Var conv_fuse_low(const Var& s1_low, const Var& s2_low, const WeightStore& weights,
                  const std::string& prefix = "fuse1x1.");

/// Where the two maps are combined: on the stream-1 grid, or at image
/// resolution with S1 and the weights upsampled.
enum class FusionResolution { kLow, kFull };

FusionResolution parse_fusion_resolution(const std::string& name);
std::string fusion_resolution_name(FusionResolution r);

/// Any fusion mode at either resolution. `s2` is at image resolution
/// (out_h x out_w); attention reads `features`. Output is out_h x out_w.
Var fuse_streams(FusionMode mode, FusionResolution where, const Var& s1_low, const Tensor& s2,
                 const Var& features, const WeightStore& weights, Index stride);

/// Area-averages an image-resolution S2 down to the stream-1 grid.
Tensor downsample_s2(const Tensor& s2, Index stride);

}  // namespace dcl
