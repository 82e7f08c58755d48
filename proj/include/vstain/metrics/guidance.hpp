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

#ifndef VSTAIN_METRICS_GUIDANCE_HPP_
#define VSTAIN_METRICS_GUIDANCE_HPP_

#include <torch/torch.h>

#include <cstdint>
#include <span>

#include "vstain/nets/generator.hpp"

namespace vstain::metrics {

// Area under the ROC curve by rank statistic; tied scores count one half.
// Throws ConfigError unless both classes are present.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct GuidanceEvaluation {
  double segmentation_accuracy = 0.0;  // over pixels of label-0 patches
  std::int64_t segmentation_pixels = 0;
  double auc = 0.0;
  std::int64_t positives = 0;
  std::int64_t negatives = 0;
};

// Runs the generator's SCPA head over images [N, C, H, W] in chunks.
// layers [N, H, W] int64, labels [N] in {0, 1}.
GuidanceEvaluation evaluate_guidance(nets::GeneratorImpl& generator, const torch::Tensor& images,
                                     const torch::Tensor& layers, const torch::Tensor& labels,
                                     std::int64_t chunk = 4);

}  // namespace vstain::metrics

#endif  // VSTAIN_METRICS_GUIDANCE_HPP_
