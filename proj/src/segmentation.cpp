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

#include "dcl/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace dcl {

void BoundingBox::expand(Index row, Index col) {
  if (max_row < min_row) {
    min_row = max_row = row;
    min_col = max_col = col;
    return;
  }
  min_row = std::min(min_row, row);
  max_row = std::max(max_row, row);
  min_col = std::min(min_col, col);
  max_col = std::max(max_col, col);
}

void BoundingBox::expand(const BoundingBox& o) {
  expand(o.min_row, o.min_col);
  expand(o.max_row, o.max_col);
}

namespace {

class DisjointSet {
 public:
  explicit DisjointSet(Index n) : parent_(size_t(n)), rank_(size_t(n), 0), size_(size_t(n), 1) {
    std::iota(parent_.begin(), parent_.end(), Index{0});
  }
  Index find(Index x) {
    Index root = x;
    while (parent_[size_t(root)] != root) root = parent_[size_t(root)];
    while (parent_[size_t(x)] != root) {
      const Index next = parent_[size_t(x)];
      parent_[size_t(x)] = root;
      x = next;
    }
    return root;
  }
  Index join(Index a, Index b) {
    if (rank_[size_t(a)] < rank_[size_t(b)]) std::swap(a, b);
    parent_[size_t(b)] = a;
    size_[size_t(a)] += size_[size_t(b)];
    if (rank_[size_t(a)] == rank_[size_t(b)]) ++rank_[size_t(a)];
    return a;
  }
  Index size(Index root) const { return size_[size_t(root)]; }

 private:
  std::vector<Index> parent_;
  std::vector<int> rank_;
  std::vector<Index> size_;
};

struct Edge {
  Index a, b;
  double w;
};

// Separable Gaussian blur with clamped borders, kernel length ceil(4 sigma) + 1.
Tensor smooth(const Tensor& image, double sigma) {
  if (sigma <= 0) return image;
  const Index half = Index(std::ceil(sigma * 4.0));
  std::vector<double> mask(size_t(half + 1));
  double total = 0.0;
  for (Index i = 0; i <= half; ++i) {
    mask[size_t(i)] = std::exp(-0.5 * (double(i) / sigma) * (double(i) / sigma));
    total += (i == 0 ? 1.0 : 2.0) * mask[size_t(i)];
  }
  for (double& m : mask) m /= total;

  const Index planes = image.dim(0) * image.dim(1), h = image.dim(2), w = image.dim(3);
  Tensor tmp(image.dims()), out(image.dims());
  for (Index p = 0; p < planes; ++p) {
    const double* src = image.ptr() + p * h * w;
    double* mid = tmp.ptr() + p * h * w;
    double* dst = out.ptr() + p * h * w;
    for (Index i = 0; i < h; ++i) {
      for (Index j = 0; j < w; ++j) {
        double acc = mask[0] * src[i * w + j];
        for (Index k = 1; k <= half; ++k) {
          acc += mask[size_t(k)] * (src[i * w + std::max<Index>(j - k, 0)] + src[i * w + std::min(j + k, w - 1)]);
        }
        mid[i * w + j] = acc;
      }
    }
    for (Index i = 0; i < h; ++i) {
      for (Index j = 0; j < w; ++j) {
        double acc = mask[0] * mid[i * w + j];
        for (Index k = 1; k <= half; ++k) {
          acc += mask[size_t(k)] * (mid[std::max<Index>(i - k, 0) * w + j] + mid[std::min(i + k, h - 1) * w + j]);
        }
        dst[i * w + j] = acc;
      }
    }
  }
  return out;
}

}  // namespace

SegmentationLevel make_level(Index height, Index width, const std::vector<Index>& labels,
                             const SegmentParams& params) {
  if (Index(labels.size()) != height * width) throw std::invalid_argument("make_level: label count mismatch");
  SegmentationLevel level;
  level.height = height;
  level.width = width;
  level.params = params;
  level.labels.resize(labels.size());

  std::vector<Index> remap;
  std::vector<Index> seen_at;  // original label -> new id, grown on demand
  for (size_t i = 0; i < labels.size(); ++i) {
    const Index old = labels[i];
    if (old < 0) throw std::invalid_argument("make_level: negative label");
    if (size_t(old) >= seen_at.size()) seen_at.resize(size_t(old) + 1, -1);
    if (seen_at[size_t(old)] < 0) seen_at[size_t(old)] = Index(remap.size()), remap.push_back(old);
    level.labels[i] = seen_at[size_t(old)];
  }

  level.segments.resize(remap.size());
  std::vector<std::set<Index>> adjacency(remap.size());
  for (Index r = 0; r < height; ++r) {
    for (Index c = 0; c < width; ++c) {
      const Index idx = r * width + c;
      const Index id = level.labels[size_t(idx)];
      Segment& s = level.segments[size_t(id)];
      s.pixels.push_back(idx);
      s.bbox.expand(r, c);
      if (c + 1 < width) {
        const Index other = level.labels[size_t(idx + 1)];
        if (other != id) adjacency[size_t(id)].insert(other), adjacency[size_t(other)].insert(id);
      }
      if (r + 1 < height) {
        const Index other = level.labels[size_t(idx + width)];
        if (other != id) adjacency[size_t(id)].insert(other), adjacency[size_t(other)].insert(id);
      }
    }
  }
  for (size_t i = 0; i < remap.size(); ++i) {
    level.segments[i].id = Index(i);
    level.segments[i].neighbors.assign(adjacency[i].begin(), adjacency[i].end());
  }
  return level;
}

SegmentationLevel felzenszwalb_segment(const Tensor& image, const SegmentParams& params) {
  if (image.rank() != 4 || image.empty()) throw std::invalid_argument("felzenszwalb_segment: expected [1,C,H,W]");
  if (params.k < 0 || params.min_size < 1) throw std::invalid_argument("felzenszwalb_segment: invalid parameters");
  const Tensor s = smooth(image, params.sigma);
  const Index chans = s.dim(1), h = s.dim(2), w = s.dim(3), n = h * w;

  auto dist = [&](Index p, Index q) {
    double acc = 0.0;
    for (Index c = 0; c < chans; ++c) {
      const double d = s[c * n + p] - s[c * n + q];
      acc += d * d;
    }
    return std::sqrt(acc);
  };

  std::vector<Edge> edges;
  edges.reserve(size_t(4 * n));
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      const Index p = y * w + x;
      if (x + 1 < w) edges.push_back({p, p + 1, dist(p, p + 1)});
      if (y + 1 < h) edges.push_back({p, p + w, dist(p, p + w)});
      if (x + 1 < w && y + 1 < h) edges.push_back({p, p + w + 1, dist(p, p + w + 1)});
      if (x + 1 < w && y > 0) edges.push_back({p, p - w + 1, dist(p, p - w + 1)});
    }
  }
  std::stable_sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) { return a.w < b.w; });

  DisjointSet sets(n);
  std::vector<double> threshold(size_t(n), params.k);
  for (const Edge& e : edges) {
    const Index a = sets.find(e.a), b = sets.find(e.b);
    if (a == b) continue;
    if (e.w <= threshold[size_t(a)] && e.w <= threshold[size_t(b)]) {
      const Index root = sets.join(a, b);
      threshold[size_t(root)] = e.w + params.k / double(sets.size(root));
    }
  }
  for (const Edge& e : edges) {
    const Index a = sets.find(e.a), b = sets.find(e.b);
    if (a != b && (sets.size(a) < params.min_size || sets.size(b) < params.min_size)) sets.join(a, b);
  }

  std::vector<Index> labels(static_cast<size_t>(n));
  for (Index p = 0; p < n; ++p) labels[size_t(p)] = sets.find(p);
  return make_level(h, w, labels, params);
}

std::vector<SegmentationLevel> multi_level_segment(const Tensor& image,
                                                   const std::array<SegmentParams, 3>& params) {
  std::vector<SegmentationLevel> levels;
  levels.reserve(3);
  for (const auto& p : params) levels.push_back(felzenszwalb_segment(image, p));
  return levels;
}

SegmentationLevel flip_level(const SegmentationLevel& level) {
  std::vector<Index> labels(level.labels.size());
  for (Index r = 0; r < level.height; ++r) {
    for (Index c = 0; c < level.width; ++c) {
      labels[size_t(r * level.width + c)] = level.labels[size_t(r * level.width + (level.width - 1 - c))];
    }
  }
  return make_level(level.height, level.width, labels, level.params);
}

int segment_saliency_label(const Segment& segment, const Tensor& gt_mask) {
  if (segment.pixels.empty()) throw std::invalid_argument("segment_saliency_label: empty segment");
  double total = 0.0;
  for (Index p : segment.pixels) {
    if (p < 0 || p >= gt_mask.size()) throw std::out_of_range("segment_saliency_label: pixel outside mask");
    total += gt_mask[p];
  }
  return total / double(segment.pixels.size()) > 0.5 ? 1 : 0;
}

}  // namespace dcl
