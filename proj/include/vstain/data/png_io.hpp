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

#ifndef VSTAIN_DATA_PNG_IO_HPP_
#define VSTAIN_DATA_PNG_IO_HPP_

#include <cstdint>
#include <filesystem>

#include "vstain/data/image.hpp"

namespace vstain::data {

// 8-bit gray (1 channel) or RGB (3 channels) PNG. Throws std::runtime_error.
void write_png(const std::filesystem::path& path, const Raster<std::uint8_t>& raster);
Raster<std::uint8_t> read_png(const std::filesystem::path& path);

// Convenience wrappers that quantize / normalize.
void write_image(const std::filesystem::path& path, const Image& image);
Image read_image(const std::filesystem::path& path);

}  // namespace vstain::data

#endif  // VSTAIN_DATA_PNG_IO_HPP_
