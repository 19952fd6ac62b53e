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

#include <Eigen/Sparse>

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace dcl {

// Contour-guided dense CRF over a binary labelling. The pairwise term is
//   theta_ij = [l_i != l_j] * ( w1 * exp(-|p_i-p_j|^2 / 2 sa^2 - |I_i-I_j|^2 / 2 sb^2
//                                        - |v_i-v_j|^2 / 2 sg^2)
//                             + w2 * exp(-|p_i-p_j|^2 / 2 se^2) )
// with positions in pixels, intensities on a 0..255 scale and v the contour
// embedding. Each kernel is truncated to a square window of radius
// floor(3 sigma) around the pixel; energy and inference share that support.

struct CrfConfig {
  double w1 = 3.0;
  double w2 = 5.0;
  double sigma_alpha = 3.0;    // kernel 1, position
  double sigma_beta = 50.0;    // kernel 1, intensity
  double sigma_gamma = 3.0;    // kernel 1, contour embedding
  double sigma_epsilon = 9.0;  // kernel 2, position
  double rho = 0.1;            // contour affinity scale
  int iterations = 10;
  Index neighborhood = 11;     // affinity window side, odd
  Index eig_count = 16;
  double eig_tol = 1e-8;       // residual bound relative to |v|

  /// Throws std::invalid_argument naming every non-positive field.
  void validate() const;
};

/// Integer midpoint line from a to b, both endpoints included, as (row, col).
std::vector<std::pair<Index, Index>> bresenham_line(Index r0, Index c0, Index r1, Index c1);

/// W_ij = exp(-max_{p on line(i,j)} M(p)^2 / rho) for every pair inside the
/// neighbourhood window; the line is always traced from the lower pixel index
/// so W is exactly symmetric. No diagonal. `contour` is [1,1,H,W] in [0,1].
Eigen::SparseMatrix<double> contour_affinity(const Tensor& contour, Index neighborhood, double rho);

struct ContourEmbedding {
  Eigen::VectorXd eigenvalues;  // ascending
  RowMatrixXd vectors;          // N x k, column j is the j-th generalized eigenvector, v^T D v = 1
  Eigen::VectorXd degree;       // D
  Eigen::VectorXd residuals;    // |(D-W)v - lambda D v| / |v| per pair
  std::vector<std::string> warnings;

  /// Per-pixel features for the CRF: rows of `vectors` scaled by sqrt(sum D),
  /// which makes a constant eigenvector a vector of ones.
  RowMatrixXd features() const;
};

/// Smallest `count` eigenpairs of (D - W) v = lambda D v. Block shift-invert
/// subspace iteration with a sparse LDL^T factorisation; dense solve for
/// small graphs. Deterministic.
ContourEmbedding contour_embedding(const Eigen::SparseMatrix<double>& W, Index count = 16,
                                   double tol = 1e-8);

/// Precomputed pairwise kernels for one image.
class DenseCrfKernels {
 public:
  /// `image` is [1,C,H,W] in [0,1]; `features` is N x F (may have F = 0).
  DenseCrfKernels(const Tensor& image, const RowMatrixXd& features, const CrfConfig& config);

  Index height() const { return h_; }
  Index width() const { return w_; }
  /// out_i = sum_{j != i} k_ij x_j, with k the sum of both kernels.
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  /// k_ij for a single pair (0 outside both windows).
  double pair(Index i, Index j) const;

 private:
  Index h_, w_;
  Index r1_, r2_;
  double w2_;
  std::vector<double> k1_;          // per pixel, (2 r1 + 1)^2 window, row-major offsets
  std::vector<double> g2_;          // 1-D kernel-2 taps, index |d|
};

/// E(L) = -sum_i log P(l_i) + sum_{i<j} theta_ij(l_i, l_j), with P(l=1) = S.
/// `labels` holds 0/1 per pixel.
double crf_energy(const std::vector<int>& labels, const Tensor& unary, const Tensor& image,
                  const RowMatrixXd& features, const CrfConfig& config);

using MeanFieldObserver = std::function<void(int iteration, const Tensor& posterior)>;

/// Jacobi mean-field updates
///   Q_i = sigmoid(logit(S_i) - sum_{j != i} k_ij (1 - 2 Q_j))
/// starting from Q = S. Returns P(l = 1) per pixel as [1,1,H,W].
Tensor mean_field_infer(const Tensor& unary, const Tensor& image, const RowMatrixXd& features,
                        const CrfConfig& config, const MeanFieldObserver& observer = {});

/// Full refinement from a contour map: affinity, embedding, inference.
Tensor crf_refine(const Tensor& saliency, const Tensor& image, const Tensor& contour, const CrfConfig& config,
                  std::vector<std::string>* warnings = nullptr);

}  // namespace dcl
