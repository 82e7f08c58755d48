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

#ifndef VSTAIN_DATA_IMAGE_HPP_
#define VSTAIN_DATA_IMAGE_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace vstain::data {

// Row-major, channel-interleaved (HWC) raster.
template <typename T>
struct Raster {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<T> data;

  Raster() = default;
  Raster(int h, int w, int c, T fill = T{})
      : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {}

  bool empty() const { return data.empty(); }
  std::size_t index(int row, int col, int ch = 0) const {
    return (static_cast<std::size_t>(row) * width + col) * channels + ch;
  }
  T& at(int row, int col, int ch = 0) { return data[index(row, col, ch)]; }
  const T& at(int row, int col, int ch = 0) const { return data[index(row, col, ch)]; }

  bool operator==(const Raster&) const = default;
};

// Pixel values in [0, 1].
using Image = Raster<float>;
// Integer label planes (single channel).
using Mask = Raster<std::uint8_t>;

// Pointwise scaling of 8-bit samples to [0, 1].
Image normalize(const Raster<std::uint8_t>& raw);
// Inverse of normalize with rounding; values are clamped to [0, 1] first.
Raster<std::uint8_t> quantize(const Image& image);

template <typename T>
Raster<T> crop(const Raster<T>& src, int row, int col, int height, int width) {
  Raster<T> out(height, width, src.channels);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      for (int k = 0; k < src.channels; ++k) out.at(r, c, k) = src.at(row + r, col + c, k);
    }
  }
  return out;
}

// Reverses column order (left-right mirror).
template <typename T>
Raster<T> flip_columns(const Raster<T>& src) {
  Raster<T> out(src.height, src.width, src.channels);
  for (int r = 0; r < src.height; ++r) {
    for (int c = 0; c < src.width; ++c) {
      for (int k = 0; k < src.channels; ++k) out.at(r, c, k) = src.at(r, src.width - 1 - c, k);
    }
  }
  return out;
}

std::string shape_string(int height, int width);

}  // namespace vstain::data

#endif  // VSTAIN_DATA_IMAGE_HPP_
