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

#include "dcl/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dcl {
namespace {

[[noreturn]] void shape_error(const std::string& op, const std::string& what) {
  throw std::invalid_argument(op + ": " + what);
}

void require_rank(const std::string& op, const Tensor& t, Index rank) {
  if (t.rank() != rank) {
    shape_error(op, "expected rank " + std::to_string(rank) + ", got " + shape_str(t.dims()));
  }
}

void require_same(const std::string& op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    shape_error(op, "shape mismatch " + shape_str(a.dims()) + " vs " + shape_str(b.dims()));
  }
}

void check_conv_args(const Tensor& input, const ConvSpec& spec, const Tensor& weight,
                     const Tensor& bias) {
  spec.validate();
  require_rank("dilated_conv2d", input, 4);
  if (input.dim(1) != spec.in_channels) {
    shape_error("dilated_conv2d", "input channels (dim 1) is " + std::to_string(input.dim(1)) +
                                      ", spec expects " + std::to_string(spec.in_channels));
  }
  if (weight.dims() != spec.weight_dims()) {
    shape_error("dilated_conv2d", "weight dims " + shape_str(weight.dims()) + ", spec expects " +
                                      shape_str(spec.weight_dims()));
  }
  if (bias.dims() != Shape{spec.out_channels}) {
    shape_error("dilated_conv2d", "bias dims " + shape_str(bias.dims()) + ", expected [" +
                                      std::to_string(spec.out_channels) + "]");
  }
  if (spec.out_h(input.dim(2)) <= 0) shape_error("dilated_conv2d", "input height too small");
  if (spec.out_w(input.dim(3)) <= 0) shape_error("dilated_conv2d", "input width too small");
}

// Unfolds one CHW image into a [C*kh*kw, Ho*Wo] patch matrix.
void im2col(const double* x, Index channels, Index height, Index width, const ConvSpec& s,
            Index out_h, Index out_w, RowMatrixXd& cols) {
  cols.resize(channels * s.kernel_h * s.kernel_w, out_h * out_w);
  for (Index c = 0; c < channels; ++c) {
    for (Index ki = 0; ki < s.kernel_h; ++ki) {
      for (Index kj = 0; kj < s.kernel_w; ++kj) {
        double* dst = cols.row((c * s.kernel_h + ki) * s.kernel_w + kj).data();
        for (Index ho = 0; ho < out_h; ++ho) {
          const Index ih = ho * s.stride - s.padding + ki * s.dilation;
          double* row = dst + ho * out_w;
          if (ih < 0 || ih >= height) {
            std::fill(row, row + out_w, 0.0);
            continue;
          }
          const double* src = x + (c * height + ih) * width;
          for (Index wo = 0; wo < out_w; ++wo) {
            const Index iw = wo * s.stride - s.padding + kj * s.dilation;
            row[wo] = (iw >= 0 && iw < width) ? src[iw] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const RowMatrixXd& cols, Index channels, Index height, Index width,
                const ConvSpec& s, Index out_h, Index out_w, double* dx) {
  for (Index c = 0; c < channels; ++c) {
    for (Index ki = 0; ki < s.kernel_h; ++ki) {
      for (Index kj = 0; kj < s.kernel_w; ++kj) {
        const double* src = cols.row((c * s.kernel_h + ki) * s.kernel_w + kj).data();
        for (Index ho = 0; ho < out_h; ++ho) {
          const Index ih = ho * s.stride - s.padding + ki * s.dilation;
          if (ih < 0 || ih >= height) continue;
          double* dst = dx + (c * height + ih) * width;
          for (Index wo = 0; wo < out_w; ++wo) {
            const Index iw = wo * s.stride - s.padding + kj * s.dilation;
            if (iw >= 0 && iw < width) dst[iw] += src[ho * out_w + wo];
          }
        }
      }
    }
  }
}

// Y = W * cols + b, accumulated tap by tap so every output sums its
// products in the same fixed order regardless of K.
void conv_accumulate(const Eigen::Map<const RowMatrixXd>& weight, const Tensor& bias,
                     const RowMatrixXd& cols, Eigen::Map<RowMatrixXd> out) {
  for (Index o = 0; o < out.rows(); ++o) out.row(o).setConstant(bias[o]);
  for (Index k = 0; k < cols.rows(); ++k) {
    for (Index o = 0; o < out.rows(); ++o) out.row(o) += weight(o, k) * cols.row(k);
  }
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct AxisWeights {
  std::vector<Index> lo, hi;
  std::vector<double> frac;
};

AxisWeights resize_axis(Index in, Index out) {
  AxisWeights a;
  a.lo.resize(size_t(out));
  a.hi.resize(size_t(out));
  a.frac.resize(size_t(out));
  const double ratio = double(in) / double(out);
  for (Index d = 0; d < out; ++d) {
    double src = (double(d) + 0.5) * ratio - 0.5;
    if (src < 0) src = 0;
    Index lo = Index(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    a.lo[size_t(d)] = lo;
    a.hi[size_t(d)] = std::min(lo + 1, in - 1);
    a.frac[size_t(d)] = src - double(lo);
  }
  return a;
}

}  // namespace

void ConvSpec::validate() const {
  if (in_channels < 1 || out_channels < 1) throw std::invalid_argument("ConvSpec: channels must be >= 1");
  if (kernel_h < 1 || kernel_w < 1) throw std::invalid_argument("ConvSpec: kernel must be >= 1");
  if (stride < 1) throw std::invalid_argument("ConvSpec: stride must be >= 1");
  if (dilation < 1) throw std::invalid_argument("ConvSpec: dilation must be >= 1");
  if (padding < 0) throw std::invalid_argument("ConvSpec: padding must be >= 0");
}

Index ConvSpec::output_size(Index input, Index kernel) const {
  const Index span = dilation * (kernel - 1) + 1;
  const Index padded = input + 2 * padding;
  if (padded < span) return 0;
  return (padded - span) / stride + 1;
}

Tensor conv2d_forward(const Tensor& input, const ConvSpec& spec, const Tensor& weight,
                      const Tensor& bias) {
  check_conv_args(input, spec, weight, bias);
  const Index n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const Index oh = spec.out_h(h), ow = spec.out_w(w), o = spec.out_channels;
  Tensor out({n, o, oh, ow});
  const Eigen::Map<const RowMatrixXd> wm(weight.ptr(), o, weight.size() / o);
  RowMatrixXd cols;
  for (Index b = 0; b < n; ++b) {
    im2col(input.ptr() + b * c * h * w, c, h, w, spec, oh, ow, cols);
    conv_accumulate(wm, bias, cols, Eigen::Map<RowMatrixXd>(out.ptr() + b * o * oh * ow, o, oh * ow));
  }
  return out;
}

Var dilated_conv2d(const Var& input, const ConvSpec& spec, const Var& weight, const Var& bias) {
  const Tensor& x = input.value();
  check_conv_args(x, spec, weight.value(), bias.value());
  const Index n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const Index oh = spec.out_h(h), ow = spec.out_w(w), o = spec.out_channels;
  const Index k = c * spec.kernel_h * spec.kernel_w;
  Tensor out({n, o, oh, ow});
  const Eigen::Map<const RowMatrixXd> wm(weight.value().ptr(), o, k);
  auto cols = std::make_shared<std::vector<RowMatrixXd>>(size_t(n));
  for (Index b = 0; b < n; ++b) {
    RowMatrixXd& cb = (*cols)[size_t(b)];
    im2col(x.ptr() + b * c * h * w, c, h, w, spec, oh, ow, cb);
    conv_accumulate(wm, bias.value(), cb, Eigen::Map<RowMatrixXd>(out.ptr() + b * o * oh * ow, o, oh * ow));
  }
  const bool need_cols = input.requires_grad() || weight.requires_grad() || bias.requires_grad();
  if (!need_cols) cols.reset();
  return Var::from_op(std::move(out), {input, weight, bias}, [spec, n, c, h, w, oh, ow, o, k, cols](Var::Node& node) {
    auto& in = *node.parents[0];
    auto& wt = *node.parents[1];
    auto& bs = *node.parents[2];
    const Eigen::Map<const RowMatrixXd> wm(wt.value.ptr(), o, k);
    RowMatrixXd dcols;
    for (Index b = 0; b < n; ++b) {
      const Eigen::Map<const RowMatrixXd> dy(node.grad.ptr() + b * o * oh * ow, o, oh * ow);
      const RowMatrixXd& cb = (*cols)[size_t(b)];
      if (wt.requires_grad) wt.grad_buffer().matrix(o, k).noalias() += dy * cb.transpose();
      if (bs.requires_grad) bs.grad_buffer().data() += dy.rowwise().sum().array();
      if (in.requires_grad) {
        dcols.noalias() = wm.transpose() * dy;
        col2im_add(dcols, c, h, w, spec, oh, ow, in.grad_buffer().ptr() + b * c * h * w);
      }
    }
  });
}

Var max_pool2d(const Var& input, Index window, Index stride, Index padding) {
  const Tensor& x = input.value();
  require_rank("max_pool2d", x, 4);
  if (window < 1) shape_error("max_pool2d", "window must be >= 1");
  if (stride != 1 && stride != 2) shape_error("max_pool2d", "stride must be 1 or 2");
  if (padding < 0 || padding >= window) shape_error("max_pool2d", "padding must be in [0, window)");
  const Index n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (window > h + 2 * padding || window > w + 2 * padding) {
    shape_error("max_pool2d", "window " + std::to_string(window) + " larger than input " +
                                  shape_str(x.dims()));
  }
  const Index oh = (h + 2 * padding - window) / stride + 1;
  const Index ow = (w + 2 * padding - window) / stride + 1;
  Tensor out({n, c, oh, ow});
  auto argmax = std::make_shared<std::vector<Index>>(size_t(out.size()));
  Index idx = 0;
  for (Index plane = 0; plane < n * c; ++plane) {
    const double* src = x.ptr() + plane * h * w;
    for (Index i = 0; i < oh; ++i) {
      for (Index j = 0; j < ow; ++j, ++idx) {
        double best = -std::numeric_limits<double>::infinity();
        Index best_at = -1;
        for (Index di = 0; di < window; ++di) {
          const Index y = i * stride - padding + di;
          if (y < 0 || y >= h) continue;
          for (Index dj = 0; dj < window; ++dj) {
            const Index xx = j * stride - padding + dj;
            if (xx < 0 || xx >= w) continue;
            const double v = src[y * w + xx];
            if (best_at < 0 || v > best) {
              best = v;
              best_at = y * w + xx;
            }
          }
        }
        out[idx] = best;
        (*argmax)[size_t(idx)] = plane * h * w + best_at;
      }
    }
  }
  return Var::from_op(std::move(out), {input}, [argmax](Var::Node& node) {
    Tensor& dx = node.parents[0]->grad_buffer();
    for (Index i = 0; i < node.grad.size(); ++i) dx[(*argmax)[size_t(i)]] += node.grad[i];
  });
}

Var relu(const Var& x) {
  Tensor out(x.dims(), x.value().data().max(0.0));
  return Var::from_op(std::move(out), {x}, [](Var::Node& node) {
    auto& in = *node.parents[0];
    in.grad_buffer().data() += (in.value.data() > 0.0).select(node.grad.data(), 0.0);
  });
}

Var sigmoid(const Var& x) {
  Tensor out(x.dims(), x.value().data().unaryExpr(&stable_sigmoid));
  return Var::from_op(std::move(out), {x}, [](Var::Node& node) {
    const auto& y = node.value.data();
    node.parents[0]->grad_buffer().data() += node.grad.data() * y * (1.0 - y);
  });
}

Var softmax_channels(const Var& x) {
  const Tensor& t = x.value();
  require_rank("softmax_channels", t, 4);
  const Index n = t.dim(0), c = t.dim(1), hw = t.dim(2) * t.dim(3);
  Tensor out(t.dims());
  for (Index b = 0; b < n; ++b) {
    const Eigen::Map<const RowMatrixXd> in(t.ptr() + b * c * hw, c, hw);
    Eigen::Map<RowMatrixXd> y(out.ptr() + b * c * hw, c, hw);
    const Eigen::RowVectorXd mx = in.colwise().maxCoeff();
    y = (in.rowwise() - mx).array().exp().matrix();
    const Eigen::RowVectorXd total = y.colwise().sum();
    y.array().rowwise() /= total.array();
  }
  return Var::from_op(std::move(out), {x}, [n, c, hw](Var::Node& node) {
    Tensor& dx = node.parents[0]->grad_buffer();
    for (Index b = 0; b < n; ++b) {
      const Eigen::Map<const RowMatrixXd> y(node.value.ptr() + b * c * hw, c, hw);
      const Eigen::Map<const RowMatrixXd> g(node.grad.ptr() + b * c * hw, c, hw);
      Eigen::Map<RowMatrixXd> d(dx.ptr() + b * c * hw, c, hw);
      const Eigen::RowVectorXd dot = (y.array() * g.array()).colwise().sum();
      d.array() += y.array() * (g.array().rowwise() - dot.array());
    }
  });
}

Tensor bilinear_resize(const Tensor& input, Index out_h, Index out_w) {
  require_rank("bilinear_resize", input, 4);
  if (out_h < 1 || out_w < 1) shape_error("bilinear_resize", "output size must be positive");
  const Index planes = input.dim(0) * input.dim(1), h = input.dim(2), w = input.dim(3);
  const AxisWeights ay = resize_axis(h, out_h), ax = resize_axis(w, out_w);
  Tensor out({input.dim(0), input.dim(1), out_h, out_w});
  for (Index p = 0; p < planes; ++p) {
    const double* src = input.ptr() + p * h * w;
    double* dst = out.ptr() + p * out_h * out_w;
    for (Index i = 0; i < out_h; ++i) {
      const double fy = ay.frac[size_t(i)];
      const double* r0 = src + ay.lo[size_t(i)] * w;
      const double* r1 = src + ay.hi[size_t(i)] * w;
      for (Index j = 0; j < out_w; ++j) {
        const double fx = ax.frac[size_t(j)];
        const Index x0 = ax.lo[size_t(j)], x1 = ax.hi[size_t(j)];
        const double top = (1.0 - fx) * r0[x0] + fx * r0[x1];
        const double bot = (1.0 - fx) * r1[x0] + fx * r1[x1];
        dst[i * out_w + j] = (1.0 - fy) * top + fy * bot;
      }
    }
  }
  return out;
}

Var bilinear_resize(const Var& x, Index out_h, Index out_w) {
  Tensor out = bilinear_resize(x.value(), out_h, out_w);
  const Index h = x.dim(2), w = x.dim(3);
  return Var::from_op(std::move(out), {x}, [h, w, out_h, out_w](Var::Node& node) {
    const AxisWeights ay = resize_axis(h, out_h), ax = resize_axis(w, out_w);
    Tensor& dx = node.parents[0]->grad_buffer();
    const Index planes = dx.dim(0) * dx.dim(1);
    for (Index p = 0; p < planes; ++p) {
      double* dst = dx.ptr() + p * h * w;
      const double* g = node.grad.ptr() + p * out_h * out_w;
      for (Index i = 0; i < out_h; ++i) {
        const double fy = ay.frac[size_t(i)];
        double* r0 = dst + ay.lo[size_t(i)] * w;
        double* r1 = dst + ay.hi[size_t(i)] * w;
        for (Index j = 0; j < out_w; ++j) {
          const double fx = ax.frac[size_t(j)];
          const Index x0 = ax.lo[size_t(j)], x1 = ax.hi[size_t(j)];
          const double v = g[i * out_w + j];
          r0[x0] += (1.0 - fy) * (1.0 - fx) * v;
          r0[x1] += (1.0 - fy) * fx * v;
          r1[x0] += fy * (1.0 - fx) * v;
          r1[x1] += fy * fx * v;
        }
      }
    }
  });
}

Tensor area_downsample(const Tensor& input, Index factor) {
  require_rank("area_downsample", input, 4);
  const Index h = input.dim(2), w = input.dim(3);
  if (factor < 1 || h % factor != 0 || w % factor != 0) {
    shape_error("area_downsample", "dims " + shape_str(input.dims()) + " not divisible by " +
                                       std::to_string(factor));
  }
  const Index oh = h / factor, ow = w / factor, planes = input.dim(0) * input.dim(1);
  Tensor out({input.dim(0), input.dim(1), oh, ow});
  const double norm = 1.0 / double(factor * factor);
  for (Index p = 0; p < planes; ++p) {
    const Eigen::Map<const RowMatrixXd> src(input.ptr() + p * h * w, h, w);
    for (Index i = 0; i < oh; ++i) {
      for (Index j = 0; j < ow; ++j) {
        out[(p * oh + i) * ow + j] = src.block(i * factor, j * factor, factor, factor).sum() * norm;
      }
    }
  }
  return out;
}

Tensor flip_horizontal(const Tensor& input) {
  require_rank("flip_horizontal", input, 4);
  Tensor out(input.dims());
  const Index rows = input.dim(0) * input.dim(1) * input.dim(2), w = input.dim(3);
  for (Index r = 0; r < rows; ++r) {
    for (Index j = 0; j < w; ++j) out[r * w + j] = input[r * w + (w - 1 - j)];
  }
  return out;
}

Var stack_channels(const std::vector<Var>& inputs) {
  if (inputs.empty()) shape_error("stack_channels", "no inputs");
  const Tensor& first = inputs.front().value();
  require_rank("stack_channels", first, 4);
  const Index n = first.dim(0), h = first.dim(2), w = first.dim(3);
  Index total = 0;
  std::vector<Index> chans;
  for (const Var& v : inputs) {
    const Tensor& t = v.value();
    require_rank("stack_channels", t, 4);
    if (t.dim(0) != n || t.dim(2) != h || t.dim(3) != w) {
      shape_error("stack_channels", "mismatched input " + shape_str(t.dims()) + " vs " +
                                        shape_str(first.dims()));
    }
    chans.push_back(t.dim(1));
    total += t.dim(1);
  }
  Tensor out({n, total, h, w});
  const Index hw = h * w;
  Index c0 = 0;
  for (size_t i = 0; i < inputs.size(); ++i) {
    const Tensor& t = inputs[i].value();
    for (Index b = 0; b < n; ++b) {
      std::copy_n(t.ptr() + b * chans[i] * hw, chans[i] * hw, out.ptr() + (b * total + c0) * hw);
    }
    c0 += chans[i];
  }
  return Var::from_op(std::move(out), inputs, [n, total, hw, chans](Var::Node& node) {
    Index c0 = 0;
    for (size_t i = 0; i < chans.size(); ++i) {
      auto& p = *node.parents[i];
      if (p.requires_grad) {
        Tensor& d = p.grad_buffer();
        for (Index b = 0; b < n; ++b) {
          Eigen::Map<Eigen::ArrayXd>(d.ptr() + b * chans[i] * hw, chans[i] * hw) +=
              Eigen::Map<const Eigen::ArrayXd>(node.grad.ptr() + (b * total + c0) * hw, chans[i] * hw);
        }
      }
      c0 += chans[i];
    }
  });
}

Var channel(const Var& x, Index c) {
  const Tensor& t = x.value();
  require_rank("channel", t, 4);
  if (c < 0 || c >= t.dim(1)) shape_error("channel", "index out of range");
  const Index n = t.dim(0), chans = t.dim(1), hw = t.dim(2) * t.dim(3);
  Tensor out({n, 1, t.dim(2), t.dim(3)});
  for (Index b = 0; b < n; ++b) std::copy_n(t.ptr() + (b * chans + c) * hw, hw, out.ptr() + b * hw);
  return Var::from_op(std::move(out), {x}, [n, chans, hw, c](Var::Node& node) {
    Tensor& d = node.parents[0]->grad_buffer();
    for (Index b = 0; b < n; ++b) {
      Eigen::Map<Eigen::ArrayXd>(d.ptr() + (b * chans + c) * hw, hw) +=
          Eigen::Map<const Eigen::ArrayXd>(node.grad.ptr() + b * hw, hw);
    }
  });
}

Var add(const Var& a, const Var& b) {
  require_same("add", a.value(), b.value());
  Tensor out(a.dims(), a.value().data() + b.value().data());
  return Var::from_op(std::move(out), {a, b}, [](Var::Node& node) {
    for (auto& p : node.parents) {
      if (p->requires_grad) p->grad_buffer().data() += node.grad.data();
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same("sub", a.value(), b.value());
  Tensor out(a.dims(), a.value().data() - b.value().data());
  return Var::from_op(std::move(out), {a, b}, [](Var::Node& node) {
    if (node.parents[0]->requires_grad) node.parents[0]->grad_buffer().data() += node.grad.data();
    if (node.parents[1]->requires_grad) node.parents[1]->grad_buffer().data() -= node.grad.data();
  });
}

Var mul(const Var& a, const Var& b) {
  require_same("mul", a.value(), b.value());
  Tensor out(a.dims(), a.value().data() * b.value().data());
  return Var::from_op(std::move(out), {a, b}, [](Var::Node& node) {
    auto& pa = *node.parents[0];
    auto& pb = *node.parents[1];
    if (pa.requires_grad) pa.grad_buffer().data() += node.grad.data() * pb.value.data();
    if (pb.requires_grad) pb.grad_buffer().data() += node.grad.data() * pa.value.data();
  });
}

Var scale(const Var& x, double factor) {
  Tensor out(x.dims(), x.value().data() * factor);
  return Var::from_op(std::move(out), {x}, [factor](Var::Node& node) {
    node.parents[0]->grad_buffer().data() += node.grad.data() * factor;
  });
}

Var sum(const Var& x) {
  Tensor out({1}, x.value().data().sum());
  return Var::from_op(std::move(out), {x}, [](Var::Node& node) {
    node.parents[0]->grad_buffer().data() += node.grad[0];
  });
}

Var reshape(const Var& x, Shape dims) {
  Tensor out = x.value().reshaped(std::move(dims));
  return Var::from_op(std::move(out), {x}, [](Var::Node& node) {
    node.parents[0]->grad_buffer().data() += node.grad.data();
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  require_rank("linear", x.value(), 2);
  require_rank("linear", weight.value(), 2);
  const Index n = x.dim(0), in = x.dim(1), out_dim = weight.dim(0);
  if (weight.dim(1) != in) {
    shape_error("linear", "weight dims " + shape_str(weight.dims()) + " incompatible with input " +
                              shape_str(x.dims()));
  }
  if (bias.dims() != Shape{out_dim}) shape_error("linear", "bias dims " + shape_str(bias.dims()));
  Tensor out({n, out_dim});
  out.matrix(n, out_dim).noalias() = x.value().matrix(n, in) * weight.value().matrix(out_dim, in).transpose();
  out.matrix(n, out_dim).rowwise() += bias.value().data().matrix().transpose();
  return Var::from_op(std::move(out), {x, weight, bias}, [n, in, out_dim](Var::Node& node) {
    auto& px = *node.parents[0];
    auto& pw = *node.parents[1];
    auto& pb = *node.parents[2];
    const auto g = node.grad.matrix(n, out_dim);
    if (px.requires_grad) px.grad_buffer().matrix(n, in).noalias() += g * pw.value.matrix(out_dim, in);
    if (pw.requires_grad) pw.grad_buffer().matrix(out_dim, in).noalias() += g.transpose() * px.value.matrix(n, in);
    if (pb.requires_grad) pb.grad_buffer().data() += g.colwise().sum().transpose().array();
  });
}

}  // namespace dcl
