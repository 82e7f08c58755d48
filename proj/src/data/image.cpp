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

#include "vstain/data/image.hpp"

#include <algorithm>
#include <cmath>

namespace vstain::data {

Image normalize(const Raster<std::uint8_t>& raw) {
  Image out(raw.height, raw.width, raw.channels);
  std::transform(raw.data.begin(), raw.data.end(), out.data.begin(),
                 [](std::uint8_t v) { return static_cast<float>(v) / 255.0f; });
  return out;
}

Raster<std::uint8_t> quantize(const Image& image) {
  Raster<std::uint8_t> out(image.height, image.width, image.channels);
  std::transform(image.data.begin(), image.data.end(), out.data.begin(), [](float v) {
    const float clamped = std::clamp(std::isfinite(v) ? v : 0.0f, 0.0f, 1.0f);
    return static_cast<std::uint8_t>(std::lround(clamped * 255.0f));
  });
  return out;
}

std::string shape_string(int height, int width) {
  return std::to_string(height) + "x" + std::to_string(width);
}

}  // namespace vstain::data
