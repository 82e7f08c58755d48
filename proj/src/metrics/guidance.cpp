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

#include "vstain/metrics/guidance.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "vstain/common.hpp"

namespace vstain::metrics {

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ConfigError("roc_auc: scores and labels differ in length");
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  // Midranks over tie groups.
  double positive_rank_sum = 0.0;
  std::int64_t positives = 0;
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (size_t k = i; k < j; ++k) {
      if (labels[order[k]] != 0 && labels[order[k]] != 1) throw ConfigError("roc_auc: labels must be 0 or 1");
      if (labels[order[k]] == 1) {
        positive_rank_sum += midrank;
        ++positives;
      }
    }
    i = j;
  }
  const std::int64_t negatives = static_cast<std::int64_t>(scores.size()) - positives;
  if (positives == 0 || negatives == 0) throw ConfigError("roc_auc needs both positive and negative samples");
  const double p = static_cast<double>(positives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(negatives));
}

GuidanceEvaluation evaluate_guidance(nets::GeneratorImpl& generator, const torch::Tensor& images,
                                     const torch::Tensor& layers, const torch::Tensor& labels,
                                     std::int64_t chunk) {
  torch::NoGradGuard no_grad;
  const bool was_training = generator.is_training();
  generator.eval();
  const int64_t n = images.size(0);
  std::vector<double> scores;
  std::vector<int> truth;
  GuidanceEvaluation out;
  std::int64_t correct = 0;
  for (int64_t begin = 0; begin < n; begin += chunk) {
    const int64_t len = std::min(chunk, n - begin);
    const nets::ScpaOutputs s = generator.forward(images.narrow(0, begin, len)).scpa;
    const torch::Tensor lab = labels.narrow(0, begin, len);
    const torch::Tensor normal = lab.eq(0);
    const torch::Tensor hit = s.segmentation_logits.argmax(1).eq(layers.narrow(0, begin, len));
    correct += hit.index({normal}).sum().item<int64_t>();
    out.segmentation_pixels += normal.sum().item<int64_t>() * hit.size(1) * hit.size(2);
    const torch::Tensor logit = s.pathology_logit.reshape({-1}).to(torch::kDouble).contiguous();
    for (int64_t i = 0; i < len; ++i) {
      scores.push_back(logit[i].item<double>());
      truth.push_back(static_cast<int>(lab[i].item<int64_t>()));
    }
  }
  generator.train(was_training);
  out.segmentation_accuracy =
      out.segmentation_pixels > 0 ? static_cast<double>(correct) / static_cast<double>(out.segmentation_pixels) : 0.0;
  out.positives = std::count(truth.begin(), truth.end(), 1);
  out.negatives = static_cast<std::int64_t>(truth.size()) - out.positives;
  out.auc = (out.positives > 0 && out.negatives > 0) ? roc_auc(scores, truth) : 0.0;
  return out;
}

}  // namespace vstain::metrics
