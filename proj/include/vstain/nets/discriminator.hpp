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

#ifndef VSTAIN_NETS_DISCRIMINATOR_HPP_
#define VSTAIN_NETS_DISCRIMINATOR_HPP_

#include <torch/torch.h>

#include "nlohmann/json.hpp"

namespace vstain::nets {

struct DiscriminatorConfig {
  int in_channels = 3;
  int base_channels = 32;  // doubled per stride-2 stage, capped at 8x

  bool operator==(const DiscriminatorConfig&) const = default;
};

void to_json(nlohmann::json& j, const DiscriminatorConfig& c);
void from_json(const nlohmann::json& j, DiscriminatorConfig& c);

// Kernel / stride / padding of one stage of the critic, first stage first.
struct ConvStage {
  int kernel;
  int stride;
  int padding;
};

// c1..c4 then the score conv.
inline constexpr ConvStage kCriticStages[] = {
    {4, 2, 1}, {4, 2, 1}, {4, 2, 1}, {3, 2, 1}, {3, 1, 1}};

// Receptive field of one output logit, in input pixels.
int critic_receptive_field();
// Output side for an input side (no divisibility check).
int64_t critic_output_size(int64_t input);

// Patch critic: four stride-2 convolutions with LeakyReLU(0.2) (instance norm
// on the middle two) and a 3x3 scoring convolution. Receptive field 70.
class DiscriminatorImpl : public torch::nn::Module {
 public:
  explicit DiscriminatorImpl(DiscriminatorConfig config);

  // [B, C, H, W] with H, W multiples of 16 -> [B, 1, H', W'] logits.
  torch::Tensor forward(const torch::Tensor& x);

  const DiscriminatorConfig& config() const { return config_; }

  torch::nn::Conv2d c1{nullptr}, c2{nullptr}, c3{nullptr}, c4{nullptr}, score{nullptr};

 private:
  DiscriminatorConfig config_;
};
TORCH_MODULE(Discriminator);

}  // namespace vstain::nets

#endif  // VSTAIN_NETS_DISCRIMINATOR_HPP_
