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

#ifndef VSTAIN_LOSSES_LOSSES_HPP_
#define VSTAIN_LOSSES_LOSSES_HPP_

#include <torch/torch.h>

#include <array>
#include <string>

#include "nlohmann/json.hpp"

namespace vstain::losses {

// Coefficients of cycle, embedding, structural-constraint and
// pathology-awareness terms; both adversarial terms have weight 1.
struct LossWeights {
  double alpha = 1.0;
  double beta = 0.2;
  double gamma = 5.0;
  double iota = 5.0;

  // Throws ConfigError on negative or non-finite weights.
  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);

inline constexpr std::array<const char*, 6> kTermNames = {"adv_OH", "adv_HO", "cycle",
                                                          "embedding", "sc", "pa"};

// Scalar values of the six generator-side terms.
struct LossParts {
  double adv_OH = 0.0;
  double adv_HO = 0.0;
  double cycle = 0.0;
  double embedding = 0.0;
  double sc = 0.0;
  double pa = 0.0;

  std::array<double, 6> values() const { return {adv_OH, adv_HO, cycle, embedding, sc, pa}; }
};

struct LossRecord : LossParts {
  double total = 0.0;
};

// Same terms as differentiable scalars. Undefined tensors count as 0.
struct LossTerms {
  torch::Tensor adv_OH, adv_HO, cycle, embedding, sc, pa;

  LossParts values() const;
};

enum class AdversarialSide { kGenerator, kDiscriminator };

// Least-squares GAN objective on critic logit maps.
//   discriminator: 1/2 mean((real - 1)^2) + 1/2 mean(fake^2)
//   generator:     mean((fake - 1)^2)            (real is ignored)
torch::Tensor adversarial_loss(const torch::Tensor& real, const torch::Tensor& fake,
                               AdversarialSide side);

// Mean absolute error.
torch::Tensor cycle_loss(const torch::Tensor& x, const torch::Tensor& x_reconstructed);

// Mean squared error between two bottleneck latents.
torch::Tensor embedding_loss(const torch::Tensor& latent_a, const torch::Tensor& latent_b);

// Per image: pixel-averaged 3-class cross-entropy of logits [B, 3, H, W]
// against layer_mask [B, H, W] (labels 0..2). Averaged over the images whose
// normal_flags entry is true; 0 when there are none.
torch::Tensor structural_constraint_loss(const torch::Tensor& seg_logits, const torch::Tensor& layer_mask,
                                         const torch::Tensor& normal_flags);

// Binary cross-entropy of sigmoid(logit) against labels in {0, 1}, batch mean.
torch::Tensor pathology_awareness_loss(const torch::Tensor& logit, const torch::Tensor& label);

// adv_OH + adv_HO + alpha cycle + beta embedding + gamma sc + iota pa.
// Throws NonFiniteLoss naming the first non-finite part.
LossRecord total_loss(const LossParts& parts, const LossWeights& weights);

// Differentiable counterpart of total_loss.
torch::Tensor weighted_sum(const LossTerms& terms, const LossWeights& weights);

}  // namespace vstain::losses

#endif  // VSTAIN_LOSSES_LOSSES_HPP_
