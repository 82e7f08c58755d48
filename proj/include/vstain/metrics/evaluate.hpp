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

#ifndef VSTAIN_METRICS_EVALUATE_HPP_
#define VSTAIN_METRICS_EVALUATE_HPP_

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <string>

#include "nlohmann/json.hpp"
#include "vstain/data/dataset.hpp"
#include "vstain/metrics/extractor.hpp"
#include "vstain/nets/generator.hpp"

namespace vstain::metrics {

struct Report {
  double fid = 0.0;
  double phv1 = 0.0, phv2 = 0.0, phv3 = 0.0;  // mean over index-paired images
  std::int64_t n_images = 0;

  nlohmann::json to_json() const;  // exactly {fid, phv1, phv2, phv3, n_images}
};

// Compares two pools [N, 3, H, W]: FID over pooled features, PHV over pairs
// (a[k], b[k]). Throws ConfigError when either pool has fewer than two images
// or the pools differ in shape.
Report compare_pools(FeatureExtractorImpl& extractor, const torch::Tensor& a, const torch::Tensor& b);

// Translates OCT patches [N, 1, H, W] chunk by chunk in eval mode.
torch::Tensor stain(nets::GeneratorImpl& oct_to_he, const torch::Tensor& oct, std::int64_t chunk = 4);

struct EvaluateOptions {
  std::string split = "test";
  int grid_rows = 4;  // patches per grid image
};

// Loads <checkpoint>/G_OH, stains every patch of the split (tiled at the
// generator's patch size) and scores the virtual pool against the
// co-registered real H&E pool. Writes out_dir/report.json and
// out_dir/grids/grid_NNN.png (rows of OCT | virtual | real). Throws
// ConfigError on an empty split or unusable checkpoint.
Report evaluate_model(const std::filesystem::path& checkpoint, const data::DatasetManifest& manifest,
                      const std::filesystem::path& out_dir, const EvaluateOptions& options = {});

// Builds the generator described by <stem>.json and loads its weights.
nets::Generator load_generator(const std::filesystem::path& stem);

}  // namespace vstain::metrics

#endif  // VSTAIN_METRICS_EVALUATE_HPP_
