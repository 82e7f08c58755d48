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

#include "vstain/data/patches.hpp"

#include <algorithm>

#include "vstain/common.hpp"

namespace vstain::data {

std::string_view to_string(Domain domain) { return domain == Domain::kOct ? "oct" : "he"; }

int domain_channels(Domain domain) { return domain == Domain::kOct ? 1 : 3; }

int PatchBundle::pathology_label() const {
  return std::any_of(masks.lesion.data.begin(), masks.lesion.data.end(),
                     [](std::uint8_t v) { return v != 0; })
             ? 1
             : 0;
}

std::vector<PatchBundle> extract_patches(const Image& image, const MaskBundle& masks,
                                         Domain domain, std::string_view source_id,
                                         int patch_size) {
  if (patch_size <= 0) throw ConfigError("patch size must be positive");
  if (image.height < patch_size || image.width < patch_size) {
    throw ConfigError("image " + shape_string(image.height, image.width) +
                      " is smaller than one " + shape_string(patch_size, patch_size) + " patch");
  }
  for (const Mask* m : {&masks.layer, &masks.lesion}) {
    if (!m->empty() && (m->height != image.height || m->width != image.width)) {
      throw ConfigError("mask " + shape_string(m->height, m->width) + " does not match image " +
                        shape_string(image.height, image.width));
    }
  }
  std::vector<PatchBundle> out;
  const int rows = image.height / patch_size;
  const int cols = image.width / patch_size;
  out.reserve(static_cast<std::size_t>(rows) * cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const int r = i * patch_size, c = j * patch_size;
      PatchBundle b;
      b.image = ImagePatch{crop(image, r, c, patch_size, patch_size), domain,
                           std::string(source_id), r, c};
      if (!masks.layer.empty()) b.masks.layer = crop(masks.layer, r, c, patch_size, patch_size);
      if (!masks.lesion.empty()) b.masks.lesion = crop(masks.lesion, r, c, patch_size, patch_size);
      out.push_back(std::move(b));
    }
  }
  return out;
}

PatchBundle flip(const PatchBundle& bundle) {
  PatchBundle out = bundle;
  out.image.pixels = flip_columns(bundle.image.pixels);
  if (!bundle.masks.layer.empty()) out.masks.layer = flip_columns(bundle.masks.layer);
  if (!bundle.masks.lesion.empty()) out.masks.lesion = flip_columns(bundle.masks.lesion);
  return out;
}

bool draw_flip(std::mt19937_64& rng) { return (rng() >> 63) != 0; }

ImagePatch augment_flip(const ImagePatch& patch, std::mt19937_64& rng) {
  if (!draw_flip(rng)) return patch;
  ImagePatch out = patch;
  out.pixels = flip_columns(patch.pixels);
  return out;
}

PatchBundle augment_flip(const PatchBundle& bundle, std::mt19937_64& rng) {
  return draw_flip(rng) ? flip(bundle) : bundle;
}

}  // namespace vstain::data
