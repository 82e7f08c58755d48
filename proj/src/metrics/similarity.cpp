/* Copyright 2026 The vstain Authors. All Rights Reserved.

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

#include "vstain/metrics/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "vstain/common.hpp"

namespace vstain::metrics {
namespace {

// Symmetric PSD square root. Eigenvalues down to -1e-6 (relative to the
// largest magnitude when that exceeds 1) are treated as zero.
Eigen::VectorXd clamped_eigenvalues(const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>& solver) {
  Eigen::VectorXd ev = solver.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < -1e-6 * scale) {
      throw std::runtime_error("fid: covariance product has eigenvalue " + std::to_string(ev[i]));
    }
    ev[i] = std::max(ev[i], 0.0);
  }
  return ev;
}

Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (m + m.transpose()));
  const Eigen::VectorXd ev = clamped_eigenvalues(solver);
  return solver.eigenvectors() * ev.cwiseSqrt().asDiagonal() * solver.eigenvectors().transpose();
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& mean) {
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  return centered.transpose() * centered / static_cast<double>(x.rows() - 1);
}

}  // namespace

double fid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) {
    throw ConfigError("fid: feature dimensions differ (" + std::to_string(a.cols()) + " vs " +
                      std::to_string(b.cols()) + ")");
  }
  if (a.rows() < 2 || b.rows() < 2) throw ConfigError("fid needs at least two samples per set");
  const Eigen::RowVectorXd mu_a = a.colwise().mean(), mu_b = b.colwise().mean();
  const Eigen::MatrixXd s_a = covariance(a, mu_a), s_b = covariance(b, mu_b);
  const Eigen::MatrixXd root_a = sqrt_psd(s_a);
  const Eigen::MatrixXd product = root_a * s_b * root_a;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (product + product.transpose()),
                                                              Eigen::EigenvaluesOnly);
  const double trace_root = clamped_eigenvalues(solver).cwiseSqrt().sum();
  const double d = (mu_a - mu_b).squaredNorm() + s_a.trace() + s_b.trace() - 2.0 * trace_root;
  return std::max(d, 0.0);
}

Eigen::MatrixXd to_eigen(const torch::Tensor& features) {
  const torch::Tensor c = features.detach().to(torch::kDouble).contiguous();
  if (c.dim() != 2) throw ConfigError("features must be a [N, D] tensor");
  Eigen::MatrixXd m(c.size(0), c.size(1));
  auto acc = c.accessor<double, 2>();
  for (int64_t i = 0; i < c.size(0); ++i)
    for (int64_t j = 0; j < c.size(1); ++j) m(i, j) = acc[i][j];
  return m;
}

namespace {

torch::Tensor median_bits(const torch::Tensor& map) {
  const torch::Tensor flat = map.reshape({map.size(0), -1});
  // Lower median: element floor((n - 1) / 2) of the sorted channel.
  const torch::Tensor med = std::get<0>(flat.median(1, /*keepdim=*/true));
  return flat.gt(med);
}

}  // namespace

double phv_bits(const torch::Tensor& map_a, const torch::Tensor& map_b) {
  if (map_a.sizes() != map_b.sizes() || map_a.dim() != 3) {
    throw ConfigError("phv: feature maps must share one [C, h, w] shape");
  }
  const torch::Tensor same = median_bits(map_a).eq(median_bits(map_b));
  return 100.0 * same.to(torch::kDouble).mean().item<double>();
}

double phv(FeatureExtractorImpl& extractor, const torch::Tensor& image_a, const torch::Tensor& image_b, int level) {
  if (level < 1 || level > 3) throw ConfigError("phv level must be 1, 2 or 3, got " + std::to_string(level));
  if (image_a.sizes() != image_b.sizes() || image_a.dim() != 3) {
    throw ConfigError("phv: images must share one [C, H, W] shape");
  }
  torch::NoGradGuard no_grad;
  const auto fa = extractor.forward(image_a.unsqueeze(0));
  const auto fb = extractor.forward(image_b.unsqueeze(0));
  return phv_bits(fa[level - 1][0], fb[level - 1][0]);
}

}  // namespace vstain::metrics
