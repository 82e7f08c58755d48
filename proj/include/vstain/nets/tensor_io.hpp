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

#ifndef VSTAIN_NETS_TENSOR_IO_HPP_
#define VSTAIN_NETS_TENSOR_IO_HPP_

#include <torch/torch.h>

#include "vstain/data/image.hpp"

namespace vstain::nets {

// HWC raster -> float [C, H, W].
torch::Tensor image_to_tensor(const data::Image& image);
// [C, H, W] (any floating dtype) -> HWC raster.
data::Image tensor_to_image(const torch::Tensor& chw);
// Label plane -> int64 [H, W].
torch::Tensor mask_to_tensor(const data::Mask& mask);
// Integer [H, W] -> label plane.
data::Mask tensor_to_mask(const torch::Tensor& hw);

}  // namespace vstain::nets

#endif  // VSTAIN_NETS_TENSOR_IO_HPP_
