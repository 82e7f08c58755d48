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

#include "vstain/nets/discriminator.hpp"

#include <algorithm>

#include "vstain/common.hpp"
#include "vstain/nets/init.hpp"

namespace vstain::nets {
namespace F = torch::nn::functional;

void to_json(nlohmann::json& j, const DiscriminatorConfig& c) {
  j = {{"in_channels", c.in_channels}, {"base_channels", c.base_channels}};
}

void from_json(const nlohmann::json& j, DiscriminatorConfig& c) {
  DiscriminatorConfig d;
  c.in_channels = j.value("in_channels", d.in_channels);
  c.base_channels = j.value("base_channels", d.base_channels);
}

int critic_receptive_field() {
  int rf = 1;
  for (auto it = std::rbegin(kCriticStages); it != std::rend(kCriticStages); ++it) {
    rf = (rf - 1) * it->stride + it->kernel;
  }
  return rf;
}

int64_t critic_output_size(int64_t input) {
  for (const ConvStage& s : kCriticStages) input = (input + 2 * s.padding - s.kernel) / s.stride + 1;
  return input;
}

namespace {

torch::nn::Conv2d stage(int in, int out, const ConvStage& s) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, s.kernel).stride(s.stride).padding(s.padding));
}

}  // namespace

DiscriminatorImpl::DiscriminatorImpl(DiscriminatorConfig config) : config_(config) {
  const int n = config.base_channels;
  c1 = register_module("c1", stage(config.in_channels, n, kCriticStages[0]));
  c2 = register_module("c2", stage(n, 2 * n, kCriticStages[1]));
  c3 = register_module("c3", stage(2 * n, 4 * n, kCriticStages[2]));
  c4 = register_module("c4", stage(4 * n, 8 * n, kCriticStages[3]));
  score = register_module("score", stage(8 * n, 1, kCriticStages[4]));
  init_weights(*this);
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != config_.in_channels) {
    throw ConfigError("discriminator expects [B, " + std::to_string(config_.in_channels) +
                      ", H, W] input");
  }
  if (x.size(2) % 16 != 0 || x.size(3) % 16 != 0) {
    throw ConfigError("discriminator input " + std::to_string(x.size(2)) + "x" +
                      std::to_string(x.size(3)) + " is not divisible by 16");
  }
  const auto lrelu = F::LeakyReLUFuncOptions().negative_slope(0.2);
  torch::Tensor t = F::leaky_relu(c1(x), lrelu);
  t = F::leaky_relu(F::instance_norm(c2(t)), lrelu);
  t = F::leaky_relu(F::instance_norm(c3(t)), lrelu);
  t = F::leaky_relu(c4(t), lrelu);
  return score(t);
}

}  // namespace vstain::nets
