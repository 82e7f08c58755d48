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

#include "vstain/data/png_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

namespace vstain::data {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return f;
}

void png_warning_handler(png_structp, png_const_charp) {}

}  // namespace

void write_png(const std::filesystem::path& path, const Raster<std::uint8_t>& raster) {
  if (raster.channels != 1 && raster.channels != 3) {
    throw std::invalid_argument("write_png: only 1 or 3 channels are supported");
  }
  FilePtr file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                            png_warning_handler);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};
  if (setjmp(png_jmpbuf(png))) throw std::runtime_error("libpng failed writing " + path.string());

  png_init_io(png, file.get());
  png_set_IHDR(png, info, raster.width, raster.height, 8,
               raster.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(raster.width) * raster.channels;
  for (int r = 0; r < raster.height; ++r) {
    png_write_row(png, const_cast<png_bytep>(raster.data.data() + r * stride));
  }
  png_write_end(png, nullptr);
}

Raster<std::uint8_t> read_png(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw std::runtime_error(path.string() + " is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                           png_warning_handler);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};
  // Declared before setjmp so a longjmp never skips their destructors.
  Raster<std::uint8_t> out;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) throw std::runtime_error("libpng failed reading " + path.string());

  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int channels = png_get_channels(png, info);
  out = Raster<std::uint8_t>(static_cast<int>(png_get_image_height(png, info)),
                             static_cast<int>(png_get_image_width(png, info)), channels);
  rows.resize(out.height);
  const std::size_t stride = static_cast<std::size_t>(out.width) * channels;
  for (int r = 0; r < out.height; ++r) rows[r] = out.data.data() + r * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  return out;
}

void write_image(const std::filesystem::path& path, const Image& image) {
  write_png(path, quantize(image));
}

Image read_image(const std::filesystem::path& path) { return normalize(read_png(path)); }

}  // namespace vstain::data
