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

#include "dcl/ops.hpp"
#include "dcl/weight_store.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dcl {

// Multi-scale fully convolutional stream: a VGG-style backbone whose last
// two pools keep resolution (stride 1) and whose later convolutions are
// dilated, plus four side branches off pools 1-4 that each emit a
// single-channel map at 1/8 resolution. The four branch maps and the
// backbone score map are stacked and fused by a 1x1 convolution + sigmoid.

struct StageSpec {
  Index convs = 2;
  Index channels = 8;
  Index pool_stride = 2;
  Index dilation = 1;
};

struct SideBranchSpec {
  Index attach_stage = 1;  // 1-based; the branch reads that stage's pool output
  Index first_stride = 1;
};

struct NetworkSpec {
  Index in_channels = 3;
  std::vector<StageSpec> stages;
  std::vector<SideBranchSpec> branches;
  Index branch_channels = 16;
  Index head_channels = 128;  // width of fc6 (3x3, dilated) and fc7 (1x1)
  Index head_dilation = 4;

  static NetworkSpec toy_default();

  /// Throws std::invalid_argument listing every violated constraint.
  void validate() const;
  /// Product of pool strides; 8 for a valid spec.
  Index total_stride() const;
  /// Channels of the feature-masking layer (last conv of the last stage).
  Index feature_channels() const { return stages.back().channels; }
};

struct LayerDesc {
  std::string name;  // parameter prefix, e.g. "msfcn.stage2.conv1"
  ConvSpec conv;
};

/// Every convolution in forward order: backbone, head, branches, fuse.
std::vector<LayerDesc> msfcn_layers(const NetworkSpec& spec, const std::string& prefix = "msfcn.");

/// Pool geometry used after a stage: window 2 / pad 0 when striding,
/// window 3 / pad 1 when stride is 1 so the map size is kept.
struct PoolGeometry {
  Index window, stride, padding;
};
PoolGeometry pool_geometry(Index stride);

/// Glorot-uniform weights, zero biases, drawn from a seeded generator.
void init_conv_layers(WeightStore& store, const std::vector<LayerDesc>& layers, std::uint64_t seed);
WeightStore build_msfcn(const NetworkSpec& spec, std::uint64_t seed,
                        const std::string& prefix = "msfcn.");

struct MsfcnOutput {
  Var saliency_low;            // [1,1,H/8,W/8] sigmoid output
  Var saliency;                // [1,1,H,W] bilinear upsampling of saliency_low (S1)
  Var features;                // [1,C,H/8,W/8] feature-masking layer
  std::vector<Var> side_maps;  // the five stacked single-channel maps
};

/// `image` is [1,3,H,W] network input (see image_to_input); H and W must be
/// multiples of the total stride.
MsfcnOutput forward_msfcn(const WeightStore& weights, const NetworkSpec& spec, const Var& image,
                          const std::string& prefix = "msfcn.");

/// Saliency at the image's own size. Dimensions that are not multiples of
/// the stride are reflection-padded and the result is cropped back.
Tensor infer_single_scale(const WeightStore& weights, const NetworkSpec& spec, const Tensor& image,
                          const std::string& prefix = "msfcn.");

/// Runs the stream at each scale, resizes every map back to the input size
/// and keeps the per-pixel maximum.
Tensor multiscale_infer(const WeightStore& weights, const NetworkSpec& spec, const Tensor& image,
                        const std::vector<double>& scales = {1.0, 0.75, 0.5},
                        const std::string& prefix = "msfcn.");

/// Reflection-pads the two trailing axes at the bottom/right to multiples of `multiple`.
Tensor reflect_pad_to_multiple(const Tensor& image, Index multiple);
Tensor crop(const Tensor& t, Index height, Index width);

/// One-pixel 4-connected boundary of a binary mask: a foreground pixel is
/// on the contour if any 4-neighbour is background or lies outside the image.
Tensor prepare_contour_gt(const Tensor& mask);

}  // namespace dcl
