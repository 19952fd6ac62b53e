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

#include <array>
#include <vector>

namespace dcl {

struct SegmentParams {
  double k = 300.0;     // merge threshold scale; larger k gives larger segments
  Index min_size = 20;  // components smaller than this are absorbed by a neighbour
  double sigma = 0.5;   // Gaussian pre-smoothing, 0 disables
};

/// Inclusive pixel bounds.
struct BoundingBox {
  Index min_row = 0, min_col = 0, max_row = -1, max_col = -1;
  Index height() const { return max_row - min_row + 1; }
  Index width() const { return max_col - min_col + 1; }
  bool contains(const BoundingBox& o) const {
    return min_row <= o.min_row && min_col <= o.min_col && max_row >= o.max_row && max_col >= o.max_col;
  }
  void expand(Index row, Index col);
  void expand(const BoundingBox& o);
};

struct Segment {
  Index id = 0;
  std::vector<Index> pixels;     // row-major linear indices, ascending
  BoundingBox bbox;
  std::vector<Index> neighbors;  // ids sharing a 4-connected pixel edge, ascending
};

struct SegmentationLevel {
  Index height = 0, width = 0;
  std::vector<Index> labels;  // per pixel, contiguous 0..count-1 in raster first-appearance order
  std::vector<Segment> segments;
  SegmentParams params;

  Index count() const { return Index(segments.size()); }
};

/// Builds the segment table (pixels, boxes, adjacency) for a label map,
/// relabelling ids to raster first-appearance order.
SegmentationLevel make_level(Index height, Index width, const std::vector<Index>& labels,
                             const SegmentParams& params = {});

/// Graph-based segmentation on the 8-connected pixel graph. `image` is
/// [1,C,H,W] (any value range; edge weights are Euclidean distances between
/// smoothed pixel vectors). Deterministic: ties in edge weight keep
/// generation order.
SegmentationLevel felzenszwalb_segment(const Tensor& image, const SegmentParams& params);

std::vector<SegmentationLevel> multi_level_segment(const Tensor& image,
                                                   const std::array<SegmentParams, 3>& params);

/// Mirror of a level for a horizontally flipped image.
SegmentationLevel flip_level(const SegmentationLevel& level);

/// 1 iff the mean ground-truth value over the segment exceeds 0.5.
int segment_saliency_label(const Segment& segment, const Tensor& gt_mask);

}  // namespace dcl
