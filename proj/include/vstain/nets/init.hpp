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

#ifndef VSTAIN_NETS_INIT_HPP_
#define VSTAIN_NETS_INIT_HPP_

#include <torch/torch.h>

#include <functional>
#include <string>

namespace vstain::nets {

// In-place normal(0, std) truncated to [-2 std, 2 std] via inverse-CDF sampling.
void trunc_normal_(torch::Tensor tensor, double std = 0.02);

// Truncated normal for Linear weights, zero biases, unit LayerNorm; fan-in
// scaled normal for convolutions.
void init_weights(torch::nn::Module& module);

// FNV-1a over the raw bytes of every parameter whose dotted name satisfies the
// filter (all parameters when the filter is empty), in registration order.
std::string parameter_checksum(const torch::nn::Module& module,
                               const std::function<bool(const std::string&)>& filter = {});

}  // namespace vstain::nets

#endif  // VSTAIN_NETS_INIT_HPP_
