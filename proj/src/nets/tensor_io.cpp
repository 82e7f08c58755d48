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

#include "vstain/nets/tensor_io.hpp"

#include <cstring>

namespace vstain::nets {

torch::Tensor image_to_tensor(const data::Image& image) {
  torch::Tensor hwc = torch::empty({image.height, image.width, image.channels}, torch::kFloat);
  std::memcpy(hwc.data_ptr<float>(), image.data.data(), image.data.size() * sizeof(float));
  return hwc.permute({2, 0, 1}).contiguous();
}

data::Image tensor_to_image(const torch::Tensor& chw) {
  const torch::Tensor hwc = chw.detach().to(torch::kFloat).permute({1, 2, 0}).contiguous();
  data::Image out(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)), static_cast<int>(hwc.size(2)));
  std::memcpy(out.data.data(), hwc.data_ptr<float>(), out.data.size() * sizeof(float));
  return out;
}

torch::Tensor mask_to_tensor(const data::Mask& mask) {
  torch::Tensor hw = torch::empty({mask.height, mask.width}, torch::kUInt8);
  std::memcpy(hw.data_ptr<std::uint8_t>(), mask.data.data(), mask.data.size());
  return hw.to(torch::kLong);
}

data::Mask tensor_to_mask(const torch::Tensor& hw) {
  const torch::Tensor u8 = hw.detach().to(torch::kUInt8).contiguous();
  data::Mask out(static_cast<int>(u8.size(0)), static_cast<int>(u8.size(1)), 1);
  std::memcpy(out.data.data(), u8.data_ptr<std::uint8_t>(), out.data.size());
  return out;
}

}  // namespace vstain::nets
