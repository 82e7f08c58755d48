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

#ifndef VSTAIN_NETS_GENERATOR_HPP_
#define VSTAIN_NETS_GENERATOR_HPP_

#include <torch/torch.h>

#include <array>

#include "nlohmann/json.hpp"
#include "vstain/nets/attention.hpp"
#include "vstain/nets/scpa.hpp"
#include "vstain/nets/swin.hpp"

namespace vstain::nets {

struct GeneratorConfig {
  int in_channels = 1;
  int out_channels = 3;
  std::array<int, 3> channels{32, 64, 128};  // strides 2, 4, 8
  AttentionParams attention{8, 4, 16};
  int rstb_count = 2;
  int stl_per_rstb = 4;
  double mlp_ratio = 4.0;
  int scpa_patch = 2;
  int scpa_embed = 128;
  int scpa_heads = 4;
  int scpa_encoder_depth = 4;
  int scpa_decoder_depth = 2;
  int patch_size = 368;  // training tile side; sizes the SCPA position table

  ScpaOptions scpa_options() const;
  bool operator==(const GeneratorConfig&) const = default;

  // Default OCT -> H&E and H&E -> OCT generators.
  static GeneratorConfig oct_to_he();
  static GeneratorConfig he_to_oct();
};

void to_json(nlohmann::json& j, const GeneratorConfig& c);
void from_json(const nlohmann::json& j, GeneratorConfig& c);

struct MultiScaleFeatures {
  std::array<torch::Tensor, 3> levels;  // [B, C_i, H / 2^(i+1), W / 2^(i+1)]
};

struct GeneratorOutput {
  torch::Tensor image;   // [B, C_out, H, W] in [0, 1]
  torch::Tensor latent;  // STB bottleneck, [B, C_3, H / 8, W / 8]
  ScpaOutputs scpa;
};

// Convolutional transformer generator: stride-2 conv encoder (3 levels), Swin
// block on the coarsest level, SCPA head on the same level, z_M concatenated
// with the STB output and merged, then three stride-2 transposed convs with
// skip fusion and a sigmoid output.
class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(GeneratorConfig config);

  // Throws ConfigError unless H and W are multiples of 8.
  MultiScaleFeatures encode_multiscale(const torch::Tensor& x);
  torch::Tensor bottleneck(const MultiScaleFeatures& features);
  // Encoder + STB only; the embedding-loss latent.
  torch::Tensor latent(const torch::Tensor& x);
  // SCPA on the coarsest level, zero-padded to a multiple of the patch side
  // when needed; logits cover the full H x W.
  ScpaOutputs run_scpa(const MultiScaleFeatures& features, int64_t height, int64_t width);
  // Decoder; scpa must come from the same features.
  torch::Tensor decode(const MultiScaleFeatures& features, const torch::Tensor& stb_out,
                       const ScpaOutputs& scpa);

  GeneratorOutput forward(const torch::Tensor& x);

  const GeneratorConfig& config() const { return config_; }

  torch::nn::Conv2d enc1{nullptr}, enc2{nullptr}, enc3{nullptr};
  SwinBlock stb{nullptr};
  ScpaHead scpa{nullptr};
  torch::nn::Conv2d merge{nullptr};
  torch::nn::ConvTranspose2d up1{nullptr}, up2{nullptr}, up3{nullptr};
  torch::nn::Conv2d fuse1{nullptr}, fuse2{nullptr};
  torch::nn::Conv2d out{nullptr};

 private:
  GeneratorConfig config_;
};
TORCH_MODULE(Generator);

}  // namespace vstain::nets

#endif  // VSTAIN_NETS_GENERATOR_HPP_
