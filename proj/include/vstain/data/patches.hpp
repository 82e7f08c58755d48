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

#ifndef VSTAIN_DATA_PATCHES_HPP_
#define VSTAIN_DATA_PATCHES_HPP_

#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "vstain/data/image.hpp"
#include "vstain/data/phantom.hpp"

namespace vstain::data {

enum class Domain { kOct, kHe };

std::string_view to_string(Domain domain);
int domain_channels(Domain domain);

struct ImagePatch {
  Image pixels;
  Domain domain = Domain::kOct;
  std::string source_id;
  int row = 0;
  int col = 0;
};

// Masks that travel with an image; either plane may be empty.
struct MaskBundle {
  Mask layer;
  Mask lesion;
};

struct PatchBundle {
  ImagePatch image;
  MaskBundle masks;

  // Patch-level pathology label: 1 iff the lesion plane is present and non-empty.
  int pathology_label() const;
};

// Non-overlapping tiles on a patch_size grid, row-major order; trailing
// remainders are dropped. Masks are cut at the same offsets.
std::vector<PatchBundle> extract_patches(const Image& image, const MaskBundle& masks,
                                         Domain domain, std::string_view source_id,
                                         int patch_size = kPatchSize);

// Left-right mirror of the image and its masks.
PatchBundle flip(const PatchBundle& bundle);

// Fair coin; true means "flip".
bool draw_flip(std::mt19937_64& rng);

// Flips with probability 0.5.
ImagePatch augment_flip(const ImagePatch& patch, std::mt19937_64& rng);
PatchBundle augment_flip(const PatchBundle& bundle, std::mt19937_64& rng);

}  // namespace vstain::data

#endif  // VSTAIN_DATA_PATCHES_HPP_
