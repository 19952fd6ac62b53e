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

#include "dcl/segment_stream.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace dcl {

RFProjection project_rf_centers(const NetworkSpec& spec, Index image_h, Index image_w) {
  if (image_h < 1 || image_w < 1) throw std::invalid_argument("project_rf_centers: empty image");
  struct Geometry {
    Index kernel, stride, padding, dilation;
  };
  // Backbone path from the image up to and including the feature-masking
  // layer (the last conv of the last stage; its pool is not on the path).
  std::vector<Geometry> path;
  const auto layers = msfcn_layers(spec, "");
  size_t next = 0;
  for (size_t s = 0; s < spec.stages.size(); ++s) {
    for (Index c = 0; c < spec.stages[s].convs; ++c, ++next) {
      const ConvSpec& cs = layers[next].conv;
      path.push_back({cs.kernel_h, cs.stride, cs.padding, cs.dilation});
    }
    if (s + 1 < spec.stages.size()) {
      const PoolGeometry pg = pool_geometry(spec.stages[s].pool_stride);
      path.push_back({pg.window, pg.stride, pg.padding, 1});
    }
  }
  // x_image = scale * i + offset, built from the top layer downwards.
  double scale = 1.0, offset = 0.0;
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    const double shift = double(it->dilation * (it->kernel - 1)) / 2.0 - double(it->padding);
    offset = double(it->stride) * offset + shift;
    scale *= double(it->stride);
  }

  RFProjection rf;
  rf.image_h = image_h;
  rf.image_w = image_w;
  rf.stride = Index(scale);
  rf.offset = offset;
  rf.fm_h = (image_h + rf.stride - 1) / rf.stride;
  rf.fm_w = (image_w + rf.stride - 1) / rf.stride;
  auto nearest = [&](Index p, Index limit) {
    const auto i = Index(std::lround((double(p) - offset) / double(rf.stride)));
    return std::clamp<Index>(i, 0, limit - 1);
  };
  rf.assignment.resize(size_t(image_h * image_w));
  rf.cell_pixels.assign(size_t(rf.fm_h * rf.fm_w), 0);
  for (Index y = 0; y < image_h; ++y) {
    const Index fy = nearest(y, rf.fm_h);
    for (Index x = 0; x < image_w; ++x) {
      const Index loc = fy * rf.fm_w + nearest(x, rf.fm_w);
      rf.assignment[size_t(y * image_w + x)] = loc;
      ++rf.cell_pixels[size_t(loc)];
    }
  }
  return rf;
}

FmBox project_bbox(const BoundingBox& box, const RFProjection& rf) {
  FmBox b;
  b.r0 = std::clamp<Index>(box.min_row / rf.stride, 0, rf.fm_h - 1);
  b.c0 = std::clamp<Index>(box.min_col / rf.stride, 0, rf.fm_w - 1);
  b.r1 = std::clamp<Index>((box.max_row + rf.stride) / rf.stride - 1, b.r0, rf.fm_h - 1);
  b.c1 = std::clamp<Index>((box.max_col + rf.stride) / rf.stride - 1, b.c0, rf.fm_w - 1);
  return b;
}

Tensor backproject_segment_mask(const Segment& segment, const RFProjection& rf) {
  std::vector<Index> hits(rf.cell_pixels.size(), 0);
  for (Index p : segment.pixels) {
    if (p < 0 || p >= Index(rf.assignment.size())) {
      throw std::out_of_range("backproject_segment_mask: segment pixel outside image");
    }
    ++hits[size_t(rf.assignment[size_t(p)])];
  }
  Tensor mask = make_map(rf.fm_h, rf.fm_w);
  bool any = false;
  for (size_t i = 0; i < hits.size(); ++i) {
    if (hits[i] > 0 && 2 * hits[i] >= rf.cell_pixels[i]) {
      mask[Index(i)] = 1.0;
      any = true;
    }
  }
  if (!any) {
    for (size_t i = 0; i < hits.size(); ++i) {
      if (hits[i] > 0) mask[Index(i)] = 1.0;
    }
  }
  return mask;
}

Tensor normalize_features(const Tensor& features) {
  Tensor out = features;
  const double peak = features.empty() ? 0.0 : features.data().abs().maxCoeff();
  if (peak > 0) out.data() /= peak;
  return out;
}

Tensor mask_features(const Tensor& features, const Tensor& mask) {
  if (features.rank() != 4 || mask.rank() != 4 || features.dim(2) != mask.dim(2) ||
      features.dim(3) != mask.dim(3) || mask.dim(1) != 1) {
    throw std::invalid_argument("mask_features: features " + shape_str(features.dims()) + " vs mask " +
                                shape_str(mask.dims()));
  }
  Tensor out(features.dims());
  const Index hw = features.dim(2) * features.dim(3), planes = features.dim(0) * features.dim(1);
  const Eigen::Map<const Eigen::ArrayXd> m(mask.ptr(), hw);
  for (Index p = 0; p < planes; ++p) {
    Eigen::Map<Eigen::ArrayXd>(out.ptr() + p * hw, hw) = Eigen::Map<const Eigen::ArrayXd>(features.ptr() + p * hw, hw) * m;
  }
  return out;
}

Eigen::VectorXd spatial_pool(const Tensor& features, FmBox box, const Tensor& mask, Index grid_h,
                             Index grid_w, PoolMode mode) {
  if (grid_h < 1 || grid_w < 1) throw std::invalid_argument("spatial_pool: grid must be positive");
  const Index chans = features.dim(1), fh = features.dim(2), fw = features.dim(3);
  box.r0 = std::clamp<Index>(box.r0, 0, fh - 1);
  box.c0 = std::clamp<Index>(box.c0, 0, fw - 1);
  box.r1 = std::clamp<Index>(std::max(box.r1, box.r0), 0, fh - 1);
  box.c1 = std::clamp<Index>(std::max(box.c1, box.c0), 0, fw - 1);
  const Index bh = box.r1 - box.r0 + 1, bw = box.c1 - box.c0 + 1;

  Eigen::VectorXd out = Eigen::VectorXd::Zero(grid_h * grid_w * chans);
  for (Index gi = 0; gi < grid_h; ++gi) {
    const Index ra = box.r0 + (gi * bh) / grid_h;
    const Index rb = box.r0 + ((gi + 1) * bh + grid_h - 1) / grid_h;
    for (Index gj = 0; gj < grid_w; ++gj) {
      const Index ca = box.c0 + (gj * bw) / grid_w;
      const Index cb = box.c0 + ((gj + 1) * bw + grid_w - 1) / grid_w;
      auto cell = out.segment((gi * grid_w + gj) * chans, chans);
      Index valid = 0;
      for (Index r = ra; r < rb; ++r) {
        for (Index c = ca; c < cb; ++c) {
          if (mask[r * fw + c] < 0.5) continue;
          for (Index ch = 0; ch < chans; ++ch) {
            const double v = features[(ch * fh + r) * fw + c];
            if (mode == PoolMode::kMax) {
              cell[ch] = valid == 0 ? v : std::max(cell[ch], v);
            } else {
              cell[ch] += v;
            }
          }
          ++valid;
        }
      }
      if (mode == PoolMode::kMean && valid > 0) cell /= double(valid);
    }
  }
  return out;
}

namespace {

Eigen::VectorXd descriptor_from_masks(const Segment& segment, const SegmentationLevel& level,
                                      const std::vector<Tensor>& masks, const Tensor& features,
                                      const RFProjection& rf, const DescriptorOptions& opt) {
  if (features.rank() != 4 || features.dim(0) != 1 || features.dim(2) != rf.fm_h || features.dim(3) != rf.fm_w) {
    throw std::invalid_argument("build_descriptor: feature map " + shape_str(features.dims()) +
                                " does not match projection " + std::to_string(rf.fm_h) + "x" +
                                std::to_string(rf.fm_w));
  }
  const Tensor& own = masks[size_t(segment.id)];
  const Index cell = opt.grid_h * opt.grid_w * features.dim(1);
  Eigen::VectorXd d(3 * cell);

  d.segment(0, cell) = spatial_pool(mask_features(features, own), project_bbox(segment.bbox, rf), own,
                                    opt.grid_h, opt.grid_w, opt.mode);

  BoundingBox around = segment.bbox;
  Tensor near = own;
  for (Index nb : segment.neighbors) {
    const Segment& other = level.segments[size_t(nb)];
    around.expand(other.bbox);
    near.data() = near.data().max(masks[size_t(nb)].data());
  }
  d.segment(cell, cell) = spatial_pool(mask_features(features, near), project_bbox(around, rf), near,
                                       opt.grid_h, opt.grid_w, opt.mode);

  Tensor rest = own;
  rest.data() = 1.0 - own.data();
  const Tensor everywhere = make_map(rf.fm_h, rf.fm_w, 1.0);
  d.segment(2 * cell, cell) = spatial_pool(mask_features(features, rest), FmBox{0, 0, rf.fm_h - 1, rf.fm_w - 1},
                                           everywhere, opt.grid_h, opt.grid_w, opt.mode);
  return d;
}

std::vector<Tensor> level_masks(const SegmentationLevel& level, const RFProjection& rf) {
  if (level.height != rf.image_h || level.width != rf.image_w) {
    throw std::invalid_argument("segment stream: segmentation and projection sizes differ");
  }
  std::vector<Tensor> masks;
  masks.reserve(level.segments.size());
  for (const auto& s : level.segments) masks.push_back(backproject_segment_mask(s, rf));
  return masks;
}

}  // namespace

SegmentDescriptor build_descriptor(const Segment& segment, const SegmentationLevel& level,
                                   Index level_id, const Tensor& features, const RFProjection& rf,
                                   const DescriptorOptions& options) {
  const auto masks = level_masks(level, rf);
  return {segment.id, level_id, descriptor_from_masks(segment, level, masks, features, rf, options)};
}

RowMatrixXd build_level_descriptors(const SegmentationLevel& level, Index /*level_id*/,
                                    const Tensor& features, const RFProjection& rf,
                                    const DescriptorOptions& options) {
  const auto masks = level_masks(level, rf);
  const Index dim = 3 * options.grid_h * options.grid_w * features.dim(1);
  RowMatrixXd out(level.count(), dim);
  for (const auto& s : level.segments) {
    out.row(s.id) = descriptor_from_masks(s, level, masks, features, rf, options).transpose();
  }
  return out;
}

WeightStore build_segment_mlp(Index input_dim, Index hidden, std::uint64_t seed, const std::string& prefix) {
  if (input_dim < 1 || hidden < 1) throw std::invalid_argument("build_segment_mlp: sizes must be positive");
  std::mt19937_64 rng(seed);
  WeightStore store;
  auto layer = [&](const std::string& name, Index in, Index out) {
    const double bound = std::sqrt(6.0 / double(in + out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor w({out, in});
    for (Index i = 0; i < w.size(); ++i) w[i] = dist(rng);
    store.add(prefix + name + ".weight", std::move(w));
    store.add(prefix + name + ".bias", Tensor({out}));
  };
  layer("fc1", input_dim, hidden);
  layer("fc2", hidden, hidden);
  layer("out", hidden, 1);
  return store;
}

Var score_segments(const Var& descriptors, const WeightStore& weights, const std::string& prefix) {
  auto fc = [&](const Var& x, const std::string& name) {
    return linear(x, weights.at(prefix + name + ".weight"), weights.at(prefix + name + ".bias"));
  };
  Var h = relu(fc(descriptors, "fc1"));
  h = relu(fc(h, "fc2"));
  return sigmoid(fc(h, "out"));
}

WeightStore fit_descriptor_norm(const RowMatrixXd& descriptors, double min_std) {
  if (descriptors.rows() < 1) throw std::invalid_argument("fit_descriptor_norm: no descriptors");
  const Eigen::RowVectorXd mean = descriptors.colwise().mean();
  const Eigen::RowVectorXd var = (descriptors.rowwise() - mean).array().square().colwise().mean();
  Tensor m({descriptors.cols()}), sc({descriptors.cols()});
  for (Index j = 0; j < descriptors.cols(); ++j) {
    m[j] = mean[j];
    sc[j] = 1.0 / std::max(std::sqrt(var[j]), min_std);
  }
  WeightStore store;
  store.add("segnorm.mean", std::move(m));
  store.add("segnorm.scale", std::move(sc));
  return store;
}

WeightStore identity_descriptor_norm(Index input_dim) {
  Tensor sc({input_dim});
  sc.data().setOnes();
  WeightStore store;
  store.add("segnorm.mean", Tensor({input_dim}));
  store.add("segnorm.scale", std::move(sc));
  return store;
}

RowMatrixXd apply_descriptor_norm(const RowMatrixXd& descriptors, const WeightStore& weights) {
  const Tensor& m = weights.at("segnorm.mean").value();
  const Tensor& sc = weights.at("segnorm.scale").value();
  if (m.size() != descriptors.cols() || sc.size() != descriptors.cols()) {
    throw std::invalid_argument("apply_descriptor_norm: descriptor width mismatch");
  }
  const Eigen::Map<const Eigen::RowVectorXd> mv(m.ptr(), m.size()), sv(sc.ptr(), sc.size());
  return ((descriptors.rowwise() - mv).array().rowwise() * sv.array()).matrix();
}

Tensor render_s2(const std::vector<SegmentationLevel>& levels, const std::vector<Eigen::VectorXd>& scores) {
  if (levels.empty() || levels.size() != scores.size()) {
    throw std::invalid_argument("render_s2: need one score vector per level");
  }
  const Index h = levels.front().height, w = levels.front().width;
  Tensor out = make_map(h, w);
  for (size_t l = 0; l < levels.size(); ++l) {
    const auto& lvl = levels[l];
    if (lvl.height != h || lvl.width != w) throw std::invalid_argument("render_s2: level sizes differ");
    if (scores[l].size() != lvl.count()) throw std::invalid_argument("render_s2: score count mismatch");
    for (Index p = 0; p < h * w; ++p) out[p] += scores[l][lvl.labels[size_t(p)]];
  }
  out.data() /= double(levels.size());
  return out;
}

Tensor segment_labels(const SegmentationLevel& level, const Tensor& gt_mask) {
  Tensor labels({level.count(), 1});
  for (const auto& s : level.segments) labels[s.id] = segment_saliency_label(s, gt_mask);
  return labels;
}

}  // namespace dcl
