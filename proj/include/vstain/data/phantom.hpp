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

#ifndef VSTAIN_DATA_PHANTOM_HPP_
#define VSTAIN_DATA_PHANTOM_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "nlohmann/json.hpp"
#include "vstain/data/image.hpp"

namespace vstain::data {

inline constexpr int kPatchSize = 368;
inline constexpr int kDefaultCanvas = 2 * kPatchSize;
inline constexpr int kNumLayers = 3;

enum class Layer : std::uint8_t { kIntima = 0, kMedia = 1, kAdventitia = 2 };
enum class PathologyKind { kNormal, kLipid, kCalcium };

std::string_view to_string(PathologyKind kind);
PathologyKind pathology_from_string(std::string_view name);

struct ThicknessRange {
  int min = 0;
  int max = 0;
  bool operator==(const ThicknessRange&) const = default;
};

struct PhantomSpec {
  std::uint64_t seed = 0;
  int canvas_height = kDefaultCanvas;
  int canvas_width = kDefaultCanvas;
  // Intima, media, adventitia. The adventitia range is the depth of its dense
  // collagen band; the adventitia label extends from the media down to the
  // bottom edge of the canvas.
  std::array<ThicknessRange, kNumLayers> layer_thickness{{{60, 120}, {80, 140}, {120, 200}}};
  PathologyKind pathology = PathologyKind::kNormal;
  int lesion_count = 0;
  double noise_level = 0.25;

  bool operator==(const PhantomSpec&) const = default;
};

// Throws ConfigError when the spec is unusable.
void validate(const PhantomSpec& spec);

struct Lesion {
  double center_row = 0;
  double center_col = 0;
  double radius_rows = 0;
  double radius_cols = 0;
};

struct PhantomSample {
  Image oct_image;         // H x W x 1
  Image he_image;          // H x W x 3
  Mask layer_mask;         // labels {0 intima, 1 media, 2 adventitia}
  Mask lesion_mask;        // {0, 1}
  int pathology_label = 0; // 1 iff lesion_mask is non-empty
  std::array<int, kNumLayers> drawn_thickness{};
  std::vector<Lesion> lesions;
};

// Pure function of the spec: identical specs give bit-identical samples.
PhantomSample generate_phantom(const PhantomSpec& spec);

void to_json(nlohmann::json& j, const PhantomSpec& spec);
void from_json(const nlohmann::json& j, PhantomSpec& spec);

}  // namespace vstain::data

#endif  // VSTAIN_DATA_PHANTOM_HPP_
