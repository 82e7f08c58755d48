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

#include "vstain/nets/init.hpp"

#include <cmath>

#include "vstain/common.hpp"

namespace vstain::nets {

void trunc_normal_(torch::Tensor tensor, double std) {
  torch::NoGradGuard no_grad;
  const double lo = 0.5 * (1.0 + std::erf(-2.0 / std::sqrt(2.0)));
  const double hi = 0.5 * (1.0 + std::erf(2.0 / std::sqrt(2.0)));
  tensor.uniform_(2.0 * lo - 1.0, 2.0 * hi - 1.0);
  tensor.erfinv_();
  tensor.mul_(std * std::sqrt(2.0));
  tensor.clamp_(-2.0 * std, 2.0 * std);
}

void init_weights(torch::nn::Module& module) {
  torch::NoGradGuard no_grad;
  for (auto& child : module.modules(/*include_self=*/false)) {
    if (auto* linear = child->as<torch::nn::Linear>()) {
      trunc_normal_(linear->weight);
      if (linear->bias.defined()) linear->bias.zero_();
    } else if (auto* conv = child->as<torch::nn::Conv2d>()) {
      torch::nn::init::kaiming_normal_(conv->weight, 0.2, torch::kFanIn, torch::kLeakyReLU);
      if (conv->bias.defined()) conv->bias.zero_();
    } else if (auto* tconv = child->as<torch::nn::ConvTranspose2d>()) {
      // Fan-in of a stride-2 transposed conv is in_channels * k * k / 4.
      const auto& w = tconv->weight;
      const double fan_in = static_cast<double>(w.size(0) * w.size(2) * w.size(3)) / 4.0;
      w.normal_(0.0, std::sqrt(2.0 / fan_in));
      if (tconv->bias.defined()) tconv->bias.zero_();
    } else if (auto* norm = child->as<torch::nn::LayerNorm>()) {
      norm->weight.fill_(1.0);
      norm->bias.zero_();
    }
  }
}

std::string parameter_checksum(const torch::nn::Module& module,
                               const std::function<bool(const std::string&)>& filter) {
  Fnv1a h;
  for (const auto& item : module.named_parameters(/*recurse=*/true)) {
    if (filter && !filter(item.key())) continue;
    h.update(item.key());
    const torch::Tensor t = item.value().detach().contiguous().cpu();
    h.update(std::span<const std::byte>(static_cast<const std::byte*>(t.data_ptr()), t.nbytes()));
  }
  return h.hex();
}

}  // namespace vstain::nets
