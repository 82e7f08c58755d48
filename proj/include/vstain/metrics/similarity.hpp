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

#ifndef VSTAIN_METRICS_SIMILARITY_HPP_
#define VSTAIN_METRICS_SIMILARITY_HPP_

#include <torch/torch.h>

#include <Eigen/Dense>

#include "vstain/metrics/extractor.hpp"

namespace vstain::metrics {

// Frechet distance between Gaussian fits of two feature sets (rows are
// samples, unbiased covariance):
//   |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2).
// Eigenvalues above -1e-6 are clamped to zero; more negative ones raise.
// Throws ConfigError on dimension mismatch or fewer than two rows.
double fid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Rows of a [N, D] tensor as an Eigen matrix.
Eigen::MatrixXd to_eigen(const torch::Tensor& features);

// Percentage of equal bits between two feature maps [C, h, w], each bit being
// (value > median of its own channel), the median taken as the lower middle
// element. Throws ConfigError on shape mismatch.
double phv_bits(const torch::Tensor& map_a, const torch::Tensor& map_b);

// PHV at level 1, 2 or 3 of the extractor for two images [C, H, W].
// Throws ConfigError on an invalid level or differing image sizes.
double phv(FeatureExtractorImpl& extractor, const torch::Tensor& image_a, const torch::Tensor& image_b, int level);

}  // namespace vstain::metrics

#endif  // VSTAIN_METRICS_SIMILARITY_HPP_
