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
#include "dcl/segmentation.hpp"

#include <cstdint>
#include <vector>

namespace dcl {

/// Where each feature-map location looks in the image, and which location
/// each image pixel belongs to.
struct RFProjection {
  Index image_h = 0, image_w = 0;
  Index fm_h = 0, fm_w = 0;
  Index stride = 8;
  double offset = 0.0;              // centre(i) = stride * i + offset, in pixel units
  std::vector<Index> assignment;    // per image pixel: fm location (row-major)
  std::vector<Index> cell_pixels;   // per fm location: number of assigned pixels

  double center(Index i) const { return double(stride * i) + offset; }
};

/// Receptive-field centres of the feature-masking layer. The offset is the
/// composition of every backbone layer's centre map
///   c_in = stride * c_out - padding + dilation * (kernel - 1) / 2
/// from that layer back to the image; each pixel then goes to the nearest
/// centre by rounding (y - offset) / stride.
RFProjection project_rf_centers(const NetworkSpec& spec, Index image_h, Index image_w);

/// Inclusive box on the feature map.
struct FmBox {
  Index r0 = 0, c0 = 0, r1 = 0, c1 = 0;
};

/// Image box to feature-map box, rounding outward (floor / ceil by stride).
FmBox project_bbox(const BoundingBox& box, const RFProjection& rf);

/// Binary [1,1,fm_h,fm_w] mask: locations whose share of the segment is at
/// least 0.5, or every touched location when none reaches 0.5.
Tensor backproject_segment_mask(const Segment& segment, const RFProjection& rf);

/// Divides a feature map by its peak magnitude (unchanged if all zero).
/// Backbone activations grow during training; the segment MLP saturates on
/// unscaled descriptors.
Tensor normalize_features(const Tensor& features);

/// Channel-wise product of [1,C,h,w] features with a [1,1,h,w] mask.
Tensor mask_features(const Tensor& features, const Tensor& mask);

enum class PoolMode { kMax, kMean };

/// Pools `features` over a grid_h x grid_w split of `box`, considering only
/// positions where `mask` is 1. Cells without a valid position are zero.
/// Output is cell-major: [cell(0,0) C values, cell(0,1) C values, ...].
Eigen::VectorXd spatial_pool(const Tensor& features, FmBox box, const Tensor& mask, Index grid_h,
                             Index grid_w, PoolMode mode);

struct DescriptorOptions {
  Index grid_h = 2, grid_w = 2;
  PoolMode mode = PoolMode::kMax;
};

struct SegmentDescriptor {
  Index segment_id = 0;
  Index level_id = 0;
  Eigen::VectorXd values;  // 3 * grid_h * grid_w * C
};

/// Context 1: the segment's box over its own mask. Context 2: the box of the
/// segment and its neighbours over their union mask. Context 3: the whole
/// map with the segment's own locations zeroed.
SegmentDescriptor build_descriptor(const Segment& segment, const SegmentationLevel& level,
                                   Index level_id, const Tensor& features, const RFProjection& rf,
                                   const DescriptorOptions& options = {});

/// Descriptors of every segment of a level, one per row.
RowMatrixXd build_level_descriptors(const SegmentationLevel& level, Index level_id,
                                    const Tensor& features, const RFProjection& rf,
                                    const DescriptorOptions& options = {});

/// Two hidden ReLU layers and a logistic output unit: "mlp.fc1", "mlp.fc2", "mlp.out".
WeightStore build_segment_mlp(Index input_dim, Index hidden, std::uint64_t seed,
                              const std::string& prefix = "mlp.");

/// Per-row sigmoid scores [n,1] for descriptors [n, D].
Var score_segments(const Var& descriptors, const WeightStore& weights, const std::string& prefix = "mlp.");

/// Per-dimension standardisation of descriptors, stored as "segnorm.mean"
/// and "segnorm.scale" (1 / std). Not trained by SGD: refitted on the
/// training descriptors before each segment-stream phase. Unequal channel
/// ranges otherwise stall the MLP near the base-rate predictor.
WeightStore fit_descriptor_norm(const RowMatrixXd& descriptors, double min_std = 1e-3);
WeightStore identity_descriptor_norm(Index input_dim);
RowMatrixXd apply_descriptor_norm(const RowMatrixXd& descriptors, const WeightStore& weights);

/// Per-level piecewise-constant maps averaged into one [1,1,H,W] map.
Tensor render_s2(const std::vector<SegmentationLevel>& levels,
                 const std::vector<Eigen::VectorXd>& scores);

/// Binary segment labels of a level against a ground-truth mask.
Tensor segment_labels(const SegmentationLevel& level, const Tensor& gt_mask);

}  // namespace dcl
