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

#include "dcl/crf.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace dcl {

void CrfConfig::validate() const {
  std::string bad;
  auto check = [&](bool ok, const char* name) {
    if (!ok) bad += (bad.empty() ? "" : ", ") + std::string(name);
  };
  check(w1 >= 0.0, "w1");
  check(w2 >= 0.0, "w2");
  check(sigma_alpha > 0.0, "sigma_alpha");
  check(sigma_beta > 0.0, "sigma_beta");
  check(sigma_gamma > 0.0, "sigma_gamma");
  check(sigma_epsilon > 0.0, "sigma_epsilon");
  check(rho > 0.0, "rho");
  check(iterations >= 0, "iterations");
  check(neighborhood >= 3 && neighborhood % 2 == 1, "neighborhood");
  check(eig_count >= 1, "eig_count");
  check(eig_tol > 0.0, "eig_tol");
  if (!bad.empty()) throw std::invalid_argument("invalid CRF config: " + bad);
}

std::vector<std::pair<Index, Index>> bresenham_line(Index r0, Index c0, Index r1, Index c1) {
  std::vector<std::pair<Index, Index>> pts;
  const Index dc = std::abs(c1 - c0), dr = -std::abs(r1 - r0);
  const Index sc = c0 < c1 ? 1 : -1, sr = r0 < r1 ? 1 : -1;
  Index err = dc + dr;
  Index r = r0, c = c0;
  for (;;) {
    pts.emplace_back(r, c);
    if (r == r1 && c == c1) break;
    const Index e2 = 2 * err;
    if (e2 >= dr) err += dr, c += sc;
    if (e2 <= dc) err += dc, r += sr;
  }
  return pts;
}

Eigen::SparseMatrix<double> contour_affinity(const Tensor& contour, Index neighborhood, double rho) {
  if (contour.rank() != 4 || contour.dim(0) != 1 || contour.dim(1) != 1) {
    throw std::invalid_argument("contour_affinity: expected [1,1,H,W], got " + shape_str(contour.dims()));
  }
  if (neighborhood < 1 || neighborhood % 2 == 0 || rho <= 0.0) {
    throw std::invalid_argument("contour_affinity: neighbourhood must be odd and rho positive");
  }
  const Index h = contour.dim(2), w = contour.dim(3), n = h * w, half = neighborhood / 2;
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(size_t(n * (neighborhood * neighborhood - 1)));
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w; ++c) {
      const Index i = r * w + c;
      for (Index dr = 0; dr <= half; ++dr) {
        for (Index dc = -half; dc <= half; ++dc) {
          if (dr == 0 && dc <= 0) continue;  // j > i only
          const Index r2 = r + dr, c2 = c + dc;
          if (r2 >= h || c2 < 0 || c2 >= w) continue;
          double peak = 0.0;
          for (const auto& [pr, pc] : bresenham_line(r, c, r2, c2)) peak = std::max(peak, contour[pr * w + pc]);
          const double a = std::exp(-peak * peak / rho);
          const Index j = r2 * w + c2;
          trips.emplace_back(i, j, a);
          trips.emplace_back(j, i, a);
        }
      }
    }
  }
  Eigen::SparseMatrix<double> W(n, n);
  W.setFromTriplets(trips.begin(), trips.end());
  return W;
}

RowMatrixXd ContourEmbedding::features() const { return vectors * std::sqrt(degree.sum()); }

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Columns of Y made D-orthonormal by classical Gram-Schmidt applied twice.
// Columns that vanish are replaced by fresh random directions.
void d_orthonormalize(MatrixXd& Y, const VectorXd& d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (Index j = 0; j < Y.cols(); ++j) {
    for (int attempt = 0; attempt < 4; ++attempt) {
      const double before = std::sqrt(Y.col(j).dot(d.cwiseProduct(Y.col(j))));
      for (int pass = 0; pass < 2 && j > 0; ++pass) {
        const VectorXd coeff = Y.leftCols(j).transpose() * d.cwiseProduct(Y.col(j));
        Y.col(j) -= Y.leftCols(j) * coeff;
      }
      const double norm = std::sqrt(Y.col(j).dot(d.cwiseProduct(Y.col(j))));
      if (norm > 1e-10 * before && norm > 0.0) {
        Y.col(j) /= norm;
        break;
      }
      for (Index i = 0; i < Y.rows(); ++i) Y(i, j) = unif(rng);
    }
  }
}

// Extends the D-orthonormal block X by the directions of R that are not
// already in its span (block Gram-Schmidt twice against X, then classical
// Gram-Schmidt twice within R). Dependent columns are dropped.
MatrixXd d_orthonormal_extend(const MatrixXd& X, MatrixXd R, const VectorXd& d) {
  const VectorXd before = (R.transpose() * d.asDiagonal() * R).diagonal().cwiseSqrt();
  for (int pass = 0; pass < 2; ++pass) R -= X * (X.transpose() * (d.asDiagonal() * R));
  MatrixXd Q(X.rows(), X.cols() + R.cols());
  Q.leftCols(X.cols()) = X;
  Index kept = X.cols();
  for (Index j = 0; j < R.cols(); ++j) {
    VectorXd v = R.col(j);
    for (int pass = 0; pass < 2 && kept > X.cols(); ++pass) {
      const auto block = Q.middleCols(X.cols(), kept - X.cols());
      v -= block * (block.transpose() * d.cwiseProduct(v));
    }
    const double norm = std::sqrt(v.dot(d.cwiseProduct(v)));
    if (norm > 1e-10 * before[j] && norm > 0.0) Q.col(kept++) = v / norm;
  }
  return Q.leftCols(kept);
}

void fix_signs(MatrixXd& V) {
  for (Index j = 0; j < V.cols(); ++j) {
    Index arg = 0;
    V.col(j).cwiseAbs().maxCoeff(&arg);
    if (V(arg, j) < 0.0) V.col(j) = -V.col(j);
  }
}

}  // namespace

ContourEmbedding contour_embedding(const Eigen::SparseMatrix<double>& W, Index count, double tol) {
  if (W.rows() != W.cols() || W.rows() == 0) throw std::invalid_argument("contour_embedding: W must be square");
  const Index n = W.rows(), k = std::min(count, n);
  ContourEmbedding out;
  out.degree = W * VectorXd::Ones(n);
  Index zero = 0;
  for (Index i = 0; i < n; ++i) {
    if (out.degree[i] <= 0.0) out.degree[i] += 1e-12, ++zero;
  }
  if (zero > 0) {
    out.warnings.push_back("contour_embedding: " + std::to_string(zero) +
                           " zero degree entries regularised by 1e-12");
  }
  const VectorXd& d = out.degree;
  Eigen::SparseMatrix<double> L = -W;
  for (Index i = 0; i < n; ++i) L.coeffRef(i, i) += d[i];
  L.makeCompressed();

  MatrixXd V;
  VectorXd lambda;
  if (n <= 400) {
    const MatrixXd Ld = MatrixXd(L);
    const MatrixXd Dd = d.asDiagonal();
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> es(Ld, Dd);
    if (es.info() != Eigen::Success) throw std::runtime_error("contour_embedding: dense solver failed");
    V = es.eigenvectors().leftCols(k);
    lambda = es.eigenvalues().head(k);
  } else {
    // Locally optimal block iteration: Rayleigh-Ritz over [X, T R, X_prev],
    // with T = (L + shift D)^-1 an exact shift-invert preconditioner.
    const Index p = std::min(n, k + 8);
    const double shift = 1e-3;
    Eigen::SparseMatrix<double> A = L;
    for (Index i = 0; i < n; ++i) A.coeffRef(i, i) += shift * d[i];
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
    if (solver.info() != Eigen::Success) throw std::runtime_error("contour_embedding: factorisation failed");

    std::mt19937_64 rng(0x5eedULL);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    MatrixXd X(n, p);
    for (Index j = 0; j < p; ++j) {
      for (Index i = 0; i < n; ++i) X(i, j) = unif(rng);
    }
    X = solver.solve(d.asDiagonal() * X);
    d_orthonormalize(X, d, rng);
    MatrixXd prev;
    MatrixXd LX = L * X;
    VectorXd theta;
    for (int it = 0; it < 500; ++it) {
      Eigen::SelfAdjointEigenSolver<MatrixXd> rr(X.transpose() * LX);
      X = X * rr.eigenvectors();
      LX = LX * rr.eigenvectors();
      theta = rr.eigenvalues();
      const MatrixXd R = LX - d.asDiagonal() * X * theta.asDiagonal();
      std::vector<Index> open;
      for (Index j = 0; j < p; ++j) {
        if (R.col(j).norm() > 0.25 * tol * X.col(j).norm()) open.push_back(j);
      }
      if (open.empty() || open.front() >= k) break;

      MatrixXd extra(n, Index(open.size()) + prev.cols());
      for (size_t j = 0; j < open.size(); ++j) extra.col(Index(j)) = R.col(open[j]);
      extra.leftCols(Index(open.size())) = solver.solve(extra.leftCols(Index(open.size())));
      extra.rightCols(prev.cols()) = prev;
      const MatrixXd S = d_orthonormal_extend(X, std::move(extra), d);
      const MatrixXd LS = L * S;
      Eigen::SelfAdjointEigenSolver<MatrixXd> big(S.transpose() * LS);
      prev = X;
      X = S * big.eigenvectors().leftCols(p);
      LX = LS * big.eigenvectors().leftCols(p);
    }
    V = X.leftCols(k);
    lambda = theta.head(k);
  }
  fix_signs(V);
  out.vectors = V;
  out.eigenvalues = lambda;
  out.residuals.resize(k);
  for (Index j = 0; j < k; ++j) {
    const VectorXd r = L * V.col(j) - lambda[j] * d.cwiseProduct(V.col(j));
    out.residuals[j] = r.norm() / V.col(j).norm();
  }
  return out;
}

DenseCrfKernels::DenseCrfKernels(const Tensor& image, const RowMatrixXd& features, const CrfConfig& config)
    : h_(image.dim(2)), w_(image.dim(3)) {
  config.validate();
  if (image.rank() != 4 || image.dim(0) != 1) throw std::invalid_argument("crf: image must be [1,C,H,W]");
  const Index n = h_ * w_, chans = image.dim(1);
  if (features.cols() > 0 && features.rows() != n) {
    throw std::invalid_argument("crf: embedding has " + std::to_string(features.rows()) + " rows for " +
                                std::to_string(n) + " pixels");
  }
  r1_ = Index(std::floor(3.0 * config.sigma_alpha));
  r2_ = Index(std::floor(3.0 * config.sigma_epsilon));
  w2_ = config.w2;
  g2_.resize(size_t(r2_ + 1));
  for (Index t = 0; t <= r2_; ++t) g2_[size_t(t)] = std::exp(-double(t * t) / (2.0 * config.sigma_epsilon * config.sigma_epsilon));

  const Index side = 2 * r1_ + 1;
  k1_.assign(size_t(n * side * side), 0.0);
  if (config.w1 == 0.0) return;
  const double ia = 1.0 / (2.0 * config.sigma_alpha * config.sigma_alpha);
  const double ib = 255.0 * 255.0 / (2.0 * config.sigma_beta * config.sigma_beta);
  const double ig = 1.0 / (2.0 * config.sigma_gamma * config.sigma_gamma);
  for (Index r = 0; r < h_; ++r) {
    for (Index c = 0; c < w_; ++c) {
      const Index i = r * w_ + c;
      double* row = k1_.data() + i * side * side;
      for (Index dr = -r1_; dr <= r1_; ++dr) {
        for (Index dc = -r1_; dc <= r1_; ++dc) {
          const Index rr = r + dr, cc = c + dc;
          if ((dr == 0 && dc == 0) || rr < 0 || rr >= h_ || cc < 0 || cc >= w_) continue;
          const Index j = rr * w_ + cc;
          double color = 0.0;
          for (Index ch = 0; ch < chans; ++ch) {
            const double diff = image[ch * n + i] - image[ch * n + j];
            color += diff * diff;
          }
          const double embed = features.cols() > 0 ? (features.row(i) - features.row(j)).squaredNorm() : 0.0;
          row[(dr + r1_) * side + (dc + r1_)] =
              config.w1 * std::exp(-double(dr * dr + dc * dc) * ia - color * ib - embed * ig);
        }
      }
    }
  }
}

Eigen::VectorXd DenseCrfKernels::apply(const Eigen::VectorXd& x) const {
  const Index n = h_ * w_, side = 2 * r1_ + 1;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (Index r = 0; r < h_; ++r) {
    for (Index c = 0; c < w_; ++c) {
      const Index i = r * w_ + c;
      const double* row = k1_.data() + i * side * side;
      double acc = 0.0;
      for (Index rr = std::max<Index>(r - r1_, 0); rr <= std::min(r + r1_, h_ - 1); ++rr) {
        for (Index cc = std::max<Index>(c - r1_, 0); cc <= std::min(c + r1_, w_ - 1); ++cc) {
          acc += row[(rr - r + r1_) * side + (cc - c + r1_)] * x[rr * w_ + cc];
        }
      }
      out[i] = acc;
    }
  }
  if (w2_ == 0.0) return out;
  // Separable kernel 2 over the square window, self term removed.
  Eigen::VectorXd tmp(n);
  for (Index r = 0; r < h_; ++r) {
    for (Index c = 0; c < w_; ++c) {
      double acc = 0.0;
      for (Index cc = std::max<Index>(c - r2_, 0); cc <= std::min(c + r2_, w_ - 1); ++cc) {
        acc += g2_[size_t(std::abs(cc - c))] * x[r * w_ + cc];
      }
      tmp[r * w_ + c] = acc;
    }
  }
  for (Index r = 0; r < h_; ++r) {
    for (Index c = 0; c < w_; ++c) {
      double acc = 0.0;
      for (Index rr = std::max<Index>(r - r2_, 0); rr <= std::min(r + r2_, h_ - 1); ++rr) {
        acc += g2_[size_t(std::abs(rr - r))] * tmp[rr * w_ + c];
      }
      const Index i = r * w_ + c;
      out[i] += w2_ * (acc - g2_[0] * g2_[0] * x[i]);
    }
  }
  return out;
}

double DenseCrfKernels::pair(Index i, Index j) const {
  if (i == j) return 0.0;
  const Index ri = i / w_, ci = i % w_, rj = j / w_, cj = j % w_;
  const Index dr = rj - ri, dc = cj - ci, side = 2 * r1_ + 1;
  double k = 0.0;
  if (std::abs(dr) <= r1_ && std::abs(dc) <= r1_) k += k1_[size_t(i * side * side + (dr + r1_) * side + (dc + r1_))];
  if (std::abs(dr) <= r2_ && std::abs(dc) <= r2_) k += w2_ * g2_[size_t(std::abs(dr))] * g2_[size_t(std::abs(dc))];
  return k;
}

namespace {

void check_unary(const Tensor& unary, const Tensor& image) {
  if (unary.rank() != 4 || unary.dim(0) != 1 || unary.dim(1) != 1 || image.rank() != 4 ||
      unary.dim(2) != image.dim(2) || unary.dim(3) != image.dim(3)) {
    throw std::invalid_argument("crf: unary " + shape_str(unary.dims()) + " does not match image " +
                                shape_str(image.dims()));
  }
}

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

double crf_energy(const std::vector<int>& labels, const Tensor& unary, const Tensor& image,
                  const RowMatrixXd& features, const CrfConfig& config) {
  check_unary(unary, image);
  const Index h = image.dim(2), w = image.dim(3), n = h * w;
  if (Index(labels.size()) != n) throw std::invalid_argument("crf_energy: one label per pixel required");
  const DenseCrfKernels kernels(image, features, config);
  double e = 0.0;
  for (Index i = 0; i < n; ++i) e -= std::log(labels[size_t(i)] ? unary[i] : 1.0 - unary[i]);
  const Index reach = std::max(Index(std::floor(3.0 * config.sigma_alpha)), Index(std::floor(3.0 * config.sigma_epsilon)));
  for (Index i = 0; i < n; ++i) {
    const Index r = i / w, c = i % w;
    for (Index rr = r; rr <= std::min(r + reach, h - 1); ++rr) {
      for (Index cc = std::max<Index>(c - reach, 0); cc <= std::min(c + reach, w - 1); ++cc) {
        const Index j = rr * w + cc;
        if (j <= i || labels[size_t(i)] == labels[size_t(j)]) continue;
        e += kernels.pair(i, j);
      }
    }
  }
  return e;
}

Tensor mean_field_infer(const Tensor& unary, const Tensor& image, const RowMatrixXd& features,
                        const CrfConfig& config, const MeanFieldObserver& observer) {
  check_unary(unary, image);
  const DenseCrfKernels kernels(image, features, config);
  const Index n = unary.size();
  Eigen::VectorXd logit(n);
  for (Index i = 0; i < n; ++i) {
    const double s = unary[i];
    if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("mean_field_infer: unary outside [0,1]");
    logit[i] = std::log(s) - std::log1p(-s);
  }
  Tensor q = unary;
  Eigen::VectorXd spin(n);
  for (int it = 0; it < config.iterations; ++it) {
    for (Index i = 0; i < n; ++i) spin[i] = 1.0 - 2.0 * q[i];
    const Eigen::VectorXd msg = kernels.apply(spin);
    for (Index i = 0; i < n; ++i) q[i] = stable_sigmoid(logit[i] - msg[i]);
    if (observer) observer(it + 1, q);
  }
  return q;
}

Tensor crf_refine(const Tensor& saliency, const Tensor& image, const Tensor& contour, const CrfConfig& config,
                  std::vector<std::string>* warnings) {
  config.validate();
  RowMatrixXd features;
  if (config.w1 > 0.0) {
    const ContourEmbedding emb =
        contour_embedding(contour_affinity(contour, config.neighborhood, config.rho), config.eig_count, config.eig_tol);
    if (warnings) warnings->insert(warnings->end(), emb.warnings.begin(), emb.warnings.end());
    features = emb.features();
  }
  return mean_field_infer(saliency, image, features, config);
}

}  // namespace dcl
