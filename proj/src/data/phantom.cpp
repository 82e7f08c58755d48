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

#include "vstain/data/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "vstain/common.hpp"

namespace vstain::data {
namespace {

constexpr int kMaxPlacementAttempts = 2000;
constexpr int kLesionGap = 4;  // minimum pixel gap between lesion bounding boxes

struct Rgb {
  float r, g, b;
};

// OCT backscatter baselines.
constexpr float kOctIntima = 0.78f;
constexpr float kOctMedia = 0.38f;
constexpr float kOctAdventitiaBand = 0.70f;
constexpr float kOctAdventitiaLoose = 0.55f;

constexpr Rgb kHeIntima{0.95f, 0.78f, 0.86f};
constexpr Rgb kHeMedia{0.84f, 0.42f, 0.58f};
constexpr Rgb kHeAdventitiaBand{0.91f, 0.60f, 0.72f};
constexpr Rgb kHeAdventitiaLoose{0.97f, 0.86f, 0.91f};
constexpr Rgb kHeNucleus{0.35f, 0.20f, 0.50f};
constexpr Rgb kHeLipid{0.98f, 0.97f, 0.98f};
constexpr Rgb kHeCalcium{0.42f, 0.22f, 0.52f};

// Normalized radial coordinate: <= 1 inside the lesion. Calcium deposits use a
// squarer superellipse so their edges read as sharp plates.
double lesion_radius(const Lesion& l, PathologyKind kind, double row, double col) {
  const double dy = (row - l.center_row) / l.radius_rows;
  const double dx = (col - l.center_col) / l.radius_cols;
  if (kind == PathologyKind::kCalcium) return std::pow(std::pow(dx, 4) + std::pow(dy, 4), 0.25);
  return std::sqrt(dx * dx + dy * dy);
}

double smoothstep(double edge0, double edge1, double x) {
  const double t = std::clamp((x - edge0) / (edge1 - edge0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

struct Boundaries {
  std::vector<int> intima_end;  // per column, first media row
  std::vector<int> media_end;   // per column, first adventitia row
};

Boundaries draw_boundaries(const PhantomSpec& spec, const std::array<int, kNumLayers>& thickness,
                           std::mt19937_64& rng) {
  std::uniform_real_distribution<double> period(180.0, 420.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  Boundaries b;
  b.intima_end.resize(spec.canvas_width);
  b.media_end.resize(spec.canvas_width);
  std::array<double, 2> amp{}, lambda{}, phi{};
  for (int k = 0; k < 2; ++k) {
    const auto& range = spec.layer_thickness[k];
    amp[k] = std::min({10.0, double(thickness[k] - range.min), double(range.max - thickness[k])});
    lambda[k] = period(rng);
    phi[k] = phase(rng);
  }
  for (int c = 0; c < spec.canvas_width; ++c) {
    std::array<long, 2> local{};
    for (int k = 0; k < 2; ++k) {
      local[k] = std::lround(thickness[k] +
                             amp[k] * std::sin(2.0 * std::numbers::pi * c / lambda[k] + phi[k]));
    }
    b.intima_end[c] = static_cast<int>(local[0]);
    b.media_end[c] = static_cast<int>(local[0] + local[1]);
  }
  return b;
}

bool boxes_clear(const Lesion& a, const Lesion& b) {
  const bool rows_apart = std::abs(a.center_row - b.center_row) >
                          a.radius_rows + b.radius_rows + kLesionGap;
  const bool cols_apart = std::abs(a.center_col - b.center_col) >
                          a.radius_cols + b.radius_cols + kLesionGap;
  return rows_apart || cols_apart;
}

std::vector<Lesion> place_lesions(const PhantomSpec& spec, const std::array<int, kNumLayers>& t,
                                  std::mt19937_64& rng) {
  std::vector<Lesion> lesions;
  std::uniform_real_distribution<double> ry(14.0, 28.0);
  std::uniform_real_distribution<double> rx(24.0, 56.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double wall = t[0] + t[1];
  int attempts = 0;
  while (static_cast<int>(lesions.size()) < spec.lesion_count) {
    if (++attempts > kMaxPlacementAttempts) {
      throw ConfigError("cannot place " + std::to_string(spec.lesion_count) +
                        " non-overlapping lesions on a " +
                        shape_string(spec.canvas_height, spec.canvas_width) + " canvas");
    }
    Lesion l;
    l.radius_rows = ry(rng);
    l.radius_cols = rx(rng);
    const double row_lo = std::max(0.5 * t[0], l.radius_rows + 2.0);
    const double row_hi = std::max(row_lo, wall - 0.5 * l.radius_rows);
    l.center_row = row_lo + unit(rng) * (row_hi - row_lo);
    const double col_lo = l.radius_cols + 2.0;
    const double col_hi = spec.canvas_width - l.radius_cols - 3.0;
    l.center_col = col_lo + unit(rng) * (col_hi - col_lo);
    if (std::all_of(lesions.begin(), lesions.end(),
                    [&](const Lesion& o) { return boxes_clear(l, o); })) {
      lesions.push_back(l);
    }
  }
  return lesions;
}

}  // namespace

std::string_view to_string(PathologyKind kind) {
  switch (kind) {
    case PathologyKind::kNormal:
      return "normal";
    case PathologyKind::kLipid:
      return "lipid";
    case PathologyKind::kCalcium:
      return "calcium";
  }
  return "normal";
}

PathologyKind pathology_from_string(std::string_view name) {
  if (name == "normal") return PathologyKind::kNormal;
  if (name == "lipid") return PathologyKind::kLipid;
  if (name == "calcium") return PathologyKind::kCalcium;
  throw ConfigError("unknown pathology kind '" + std::string(name) + "'");
}

void validate(const PhantomSpec& spec) {
  if (spec.canvas_height < kPatchSize || spec.canvas_width < kPatchSize) {
    throw ConfigError("canvas " + shape_string(spec.canvas_height, spec.canvas_width) +
                      " is smaller than " + shape_string(kPatchSize, kPatchSize));
  }
  int required = 0;
  for (const auto& r : spec.layer_thickness) {
    if (r.min <= 0 || r.max < r.min) {
      throw ConfigError("layer thickness range [" + std::to_string(r.min) + ", " +
                        std::to_string(r.max) + "] must be positive and ordered");
    }
    required += r.max;
  }
  if (required >= spec.canvas_height) {
    throw ConfigError("layers need up to " + std::to_string(required) +
                      " rows but the canvas height is " + std::to_string(spec.canvas_height));
  }
  if (spec.lesion_count < 0) throw ConfigError("lesion_count must be >= 0");
  if ((spec.pathology == PathologyKind::kNormal) != (spec.lesion_count == 0)) {
    throw ConfigError("pathology kind '" + std::string(to_string(spec.pathology)) +
                      "' is inconsistent with lesion_count " + std::to_string(spec.lesion_count));
  }
  if (!(spec.noise_level >= 0.0 && spec.noise_level <= 1.0)) {
    throw ConfigError("noise_level must lie in [0, 1]");
  }
}

PhantomSample generate_phantom(const PhantomSpec& spec) {
  validate(spec);
  const int height = spec.canvas_height;
  const int width = spec.canvas_width;
  std::mt19937_64 geom_rng(mix_seed(spec.seed, 1));
  std::mt19937_64 oct_rng(mix_seed(spec.seed, 2));
  std::mt19937_64 he_rng(mix_seed(spec.seed, 3));

  PhantomSample s;
  for (int k = 0; k < kNumLayers; ++k) {
    std::uniform_int_distribution<int> draw(spec.layer_thickness[k].min,
                                            spec.layer_thickness[k].max);
    s.drawn_thickness[k] = draw(geom_rng);
  }
  const Boundaries bounds = draw_boundaries(spec, s.drawn_thickness, geom_rng);
  s.lesions = place_lesions(spec, s.drawn_thickness, geom_rng);

  s.layer_mask = Mask(height, width, 1);
  s.lesion_mask = Mask(height, width, 1);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      Layer layer = Layer::kAdventitia;
      if (r < bounds.intima_end[c]) {
        layer = Layer::kIntima;
      } else if (r < bounds.media_end[c]) {
        layer = Layer::kMedia;
      }
      s.layer_mask.at(r, c) = static_cast<std::uint8_t>(layer);
      for (const Lesion& l : s.lesions) {
        if (lesion_radius(l, spec.pathology, r + 0.5, c + 0.5) <= 1.0) s.lesion_mask.at(r, c) = 1;
      }
    }
  }
  s.pathology_label = std::any_of(s.lesion_mask.data.begin(), s.lesion_mask.data.end(),
                                  [](std::uint8_t v) { return v != 0; })
                          ? 1
                          : 0;

  // Lesion influence per pixel: 1 inside, tapering outside for lipid pools.
  auto lesion_weight = [&](int r, int c) {
    double w = 0.0;
    for (const Lesion& l : s.lesions) {
      const double q = lesion_radius(l, spec.pathology, r + 0.5, c + 0.5);
      if (spec.pathology == PathologyKind::kLipid) {
        w = std::max(w, 1.0 - smoothstep(0.8, 1.25, q));
      } else if (q <= 1.0) {
        w = 1.0;
      }
    }
    return w;
  };

  // OCT: layered backscatter, exponential depth attenuation, multiplicative speckle.
  s.oct_image = Image(height, width, 1);
  const double noise_var = spec.noise_level * spec.noise_level;
  const bool speckle = noise_var > 0.0;
  std::gamma_distribution<double> speckle_dist(speckle ? 1.0 / noise_var : 1.0,
                                               speckle ? noise_var : 1.0);
  const double depth_scale = 1.2 * height;
  const int band = s.drawn_thickness[2];
  for (int r = 0; r < height; ++r) {
    const double attenuation = std::exp(-r / depth_scale);
    for (int c = 0; c < width; ++c) {
      double base = 0.0;
      switch (static_cast<Layer>(s.layer_mask.at(r, c))) {
        case Layer::kIntima:
          base = kOctIntima * (1.0 + 0.05 * std::sin(2.0 * std::numbers::pi * r / 7.0));
          break;
        case Layer::kMedia:
          base = kOctMedia *
                 (1.0 + 0.08 * std::sin(2.0 * std::numbers::pi * (r - bounds.intima_end[c]) / 5.0));
          break;
        case Layer::kAdventitia:
          base = (r - bounds.media_end[c] < band) ? kOctAdventitiaBand : kOctAdventitiaLoose;
          break;
      }
      if (!s.lesions.empty()) {
        const double w = lesion_weight(r, c);
        const double floor = spec.pathology == PathologyKind::kLipid ? 0.18 : 0.15;
        base *= 1.0 - (1.0 - floor) * w;
      }
      const double noise = speckle ? speckle_dist(oct_rng) : 1.0;
      s.oct_image.at(r, c) = static_cast<float>(std::clamp(base * attenuation * noise, 0.0, 1.0));
    }
  }

  // H&E: per-layer stain colors, hematoxylin-dark nuclei, then lesions on top.
  s.he_image = Image(height, width, 3);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      Rgb color{};
      switch (static_cast<Layer>(s.layer_mask.at(r, c))) {
        case Layer::kIntima:
          color = kHeIntima;
          break;
        case Layer::kMedia: {
          const float f = 1.0f - 0.06f * static_cast<float>(std::sin(2.0 * std::numbers::pi * r / 6.0));
          color = {kHeMedia.r * f, kHeMedia.g * f, kHeMedia.b * f};
          break;
        }
        case Layer::kAdventitia:
          color = (r - bounds.media_end[c] < band) ? kHeAdventitiaBand : kHeAdventitiaLoose;
          break;
      }
      s.he_image.at(r, c, 0) = color.r;
      s.he_image.at(r, c, 1) = color.g;
      s.he_image.at(r, c, 2) = color.b;
    }
  }
  constexpr std::array<double, kNumLayers> kNucleiPer10k{6.0, 14.0, 8.0};
  std::uniform_int_distribution<int> any_row(0, height - 1), any_col(0, width - 1);
  std::uniform_real_distribution<double> nucleus_radius(1.2, 2.2);
  const int nuclei = static_cast<int>(height * width * kNucleiPer10k[1] / 1e4);
  for (int n = 0; n < nuclei; ++n) {
    const int r0 = any_row(he_rng), c0 = any_col(he_rng);
    const double rad = nucleus_radius(he_rng);
    // Thin out nuclei in the sparser layers by rejection.
    const int layer = s.layer_mask.at(r0, c0);
    const double keep = kNucleiPer10k[layer] / kNucleiPer10k[1];
    if (std::uniform_real_distribution<double>(0.0, 1.0)(he_rng) > keep) continue;
    const int span = static_cast<int>(std::ceil(rad));
    for (int r = std::max(0, r0 - span); r <= std::min(height - 1, r0 + span); ++r) {
      for (int c = std::max(0, c0 - span); c <= std::min(width - 1, c0 + span); ++c) {
        if ((r - r0) * (r - r0) + (c - c0) * (c - c0) > rad * rad) continue;
        s.he_image.at(r, c, 0) = kHeNucleus.r;
        s.he_image.at(r, c, 1) = kHeNucleus.g;
        s.he_image.at(r, c, 2) = kHeNucleus.b;
      }
    }
  }
  const Rgb lesion_color = spec.pathology == PathologyKind::kLipid ? kHeLipid : kHeCalcium;
  std::normal_distribution<double> stain_noise(0.0, 0.04 * spec.noise_level);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      if (s.lesion_mask.at(r, c) != 0) {
        s.he_image.at(r, c, 0) = lesion_color.r;
        s.he_image.at(r, c, 1) = lesion_color.g;
        s.he_image.at(r, c, 2) = lesion_color.b;
      }
      for (int k = 0; k < 3; ++k) {
        const double v = s.he_image.at(r, c, k) + (spec.noise_level > 0 ? stain_noise(he_rng) : 0.0);
        s.he_image.at(r, c, k) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return s;
}

void to_json(nlohmann::json& j, const PhantomSpec& spec) {
  nlohmann::json ranges = nlohmann::json::array();
  for (const auto& r : spec.layer_thickness) ranges.push_back({r.min, r.max});
  j = nlohmann::json{{"seed", spec.seed},
                     {"canvas_height", spec.canvas_height},
                     {"canvas_width", spec.canvas_width},
                     {"layer_thickness_ranges", ranges},
                     {"pathology", to_string(spec.pathology)},
                     {"lesion_count", spec.lesion_count},
                     {"noise_level", spec.noise_level}};
}

void from_json(const nlohmann::json& j, PhantomSpec& spec) {
  spec = PhantomSpec{};
  spec.seed = j.value("seed", spec.seed);
  spec.canvas_height = j.value("canvas_height", spec.canvas_height);
  spec.canvas_width = j.value("canvas_width", spec.canvas_width);
  if (j.contains("layer_thickness_ranges")) {
    const auto& ranges = j.at("layer_thickness_ranges");
    if (!ranges.is_array() || ranges.size() != kNumLayers) {
      throw ConfigError("layer_thickness_ranges needs 3 [min, max] pairs");
    }
    for (int k = 0; k < kNumLayers; ++k) {
      spec.layer_thickness[k] = {ranges[k].at(0).get<int>(), ranges[k].at(1).get<int>()};
    }
  }
  spec.pathology = pathology_from_string(j.value("pathology", std::string("normal")));
  spec.lesion_count = j.value("lesion_count", spec.pathology == PathologyKind::kNormal ? 0 : 2);
  spec.noise_level = j.value("noise_level", spec.noise_level);
}

}  // namespace vstain::data
