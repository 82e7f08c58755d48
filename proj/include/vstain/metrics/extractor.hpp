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

#ifndef VSTAIN_METRICS_EXTRACTOR_HPP_
#define VSTAIN_METRICS_EXTRACTOR_HPP_

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

namespace vstain::metrics {

// Fixed random convolutional pyramid. Input [B, 1 or 3, H, W] in [0, 1]; gray
// input is replicated to three channels. Three taps, each a 3x3 stride-2
// convolution followed by tanh:
//   level 1: [B, 16, ceil(H/2), ceil(W/2)]
//   level 2: [B, 32, ceil(H/4), ceil(W/4)]
//   level 3: [B, 64, ceil(H/8), ceil(W/8)]
// The weights are never trained.
class FeatureExtractorImpl : public torch::nn::Module {
 public:
  static constexpr std::array<int, 3> kChannels{16, 32, 64};
  static constexpr int kFeatureDim = 16 + 32 + 64;

  FeatureExtractorImpl();
  std::array<torch::Tensor, 3> forward(const torch::Tensor& x);
  // Per-image global average of every level, concatenated: [B, 112] double.
  torch::Tensor pooled_features(const torch::Tensor& x);

 private:
  torch::nn::Conv2d c1{nullptr}, c2{nullptr}, c3{nullptr};
};
TORCH_MODULE(FeatureExtractor);

inline constexpr const char* kExtractorKind = "feature_extractor";
inline constexpr std::uint64_t kExtractorSeed = 0x7e57ab1e;
// Parameter checksum of the committed artifact.
inline constexpr const char* kExtractorChecksum = "bd97043f8d809bbf";

// Deterministic construction from a seed (mt19937_64 plus Box-Muller, so the
// values do not depend on the standard library's distributions). Weights are
// N(0, 1/fan_in), biases N(0, 0.01^2).
FeatureExtractor make_extractor(std::uint64_t seed = kExtractorSeed);

// assets/feature_extractor, overridable through VSTAIN_ASSET_DIR.
std::filesystem::path default_extractor_stem();

// Writes <stem>.pt and <stem>.json.
void save_extractor(const FeatureExtractorImpl& extractor, const std::filesystem::path& stem);

// Loads the committed artifact and checks it against kExtractorChecksum.
// Throws ConfigError when missing or altered.
FeatureExtractor load_extractor(const std::filesystem::path& stem = default_extractor_stem());

}  // namespace vstain::metrics

#endif  // VSTAIN_METRICS_EXTRACTOR_HPP_
