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

#ifndef VSTAIN_NETS_SCPA_HPP_
#define VSTAIN_NETS_SCPA_HPP_

#include <torch/torch.h>

#include <utility>

#include "nlohmann/json.hpp"

namespace vstain::nets {

inline constexpr int kNumLayerClasses = 3;

struct ScpaOptions {
  int in_channels = 128;
  int patch = 2;        // P
  int embed = 128;      // d
  int heads = 4;
  int encoder_depth = 4;
  int decoder_depth = 2;
  double mlp_ratio = 4.0;
  // Token grid the position table is sized for (a 368 patch gives 46 / 2).
  int grid_rows = 23;
  int grid_cols = 23;
};

void to_json(nlohmann::json& j, const ScpaOptions& o);
void from_json(const nlohmann::json& j, ScpaOptions& o);

struct TokenSequence {
  torch::Tensor tokens;  // [B, rows * cols, d]
  int64_t rows = 0;
  int64_t cols = 0;
};

struct ScpaOutputs {
  TokenSequence z_m;                  // decoded patch embeddings
  torch::Tensor class_embeddings;     // decoded c, [B, 3, d]
  torch::Tensor segmentation_logits;  // [B, 3, H, W]
  torch::Tensor pathology_logit;      // [B]
};

// Pre-norm transformer layer with full (non-windowed) multi-head attention.
class TransformerLayerImpl : public torch::nn::Module {
 public:
  TransformerLayerImpl(int width, int heads, double mlp_ratio);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::LayerNorm norm1{nullptr};
  torch::nn::Linear qkv{nullptr};
  torch::nn::Linear proj{nullptr};
  torch::nn::LayerNorm norm2{nullptr};
  torch::nn::Linear fc1{nullptr};
  torch::nn::Linear fc2{nullptr};

 private:
  int heads_;
};
TORCH_MODULE(TransformerLayer);

// Structural-constraint / pathology-awareness head: patch embedding of a
// feature map, transformer encoder, joint decoder over patch tokens and three
// learnable class tokens, segmentation by z_M c^T, and a two-level MLP
// pathology classifier on mean-pooled z_M.
class ScpaHeadImpl : public torch::nn::Module {
 public:
  explicit ScpaHeadImpl(ScpaOptions options);

  // Flattened P x P patches, projected: x0 [B, N, d] (no position term).
  TokenSequence embed_patches(const torch::Tensor& features);
  // z0 = x0 + pos. Throws ConfigError when the feature dims are not multiples of P.
  TokenSequence patchify_embed(const torch::Tensor& features);
  TokenSequence encode_tokens(const TokenSequence& z0);
  // Returns (z_M, c).
  std::pair<TokenSequence, torch::Tensor> decode(const TokenSequence& z_l);
  // z_M c^T on the token grid, bilinearly resized to out_h x out_w: [B, 3, out_h, out_w].
  torch::Tensor segment(const TokenSequence& z_m, const torch::Tensor& classes, int64_t out_h,
                        int64_t out_w);
  torch::Tensor classify_pathology(const TokenSequence& z_m);

  // Full pass; out_h/out_w is the pixel extent covered by the token grid.
  ScpaOutputs forward(const torch::Tensor& features, int64_t out_h, int64_t out_w);

  // Position table resampled to the requested grid when it differs from the
  // configured one.
  torch::Tensor position_table(int64_t rows, int64_t cols) const;

  const ScpaOptions& options() const { return options_; }

  torch::nn::Linear patch_proj{nullptr};
  torch::Tensor pos;           // [grid_rows * grid_cols, d]
  torch::nn::ModuleList encoder{nullptr};
  torch::Tensor class_tokens;  // [3, d]: intima, media, adventitia
  torch::nn::ModuleList decoder{nullptr};
  torch::nn::Linear mlp_hidden{nullptr};
  torch::nn::Linear mlp_out{nullptr};

 private:
  ScpaOptions options_;
};
TORCH_MODULE(ScpaHead);

// Parameter-name predicates for the two guidance heads, relative to the
// owning generator ("scpa." prefix).
bool is_segmentation_head_param(const std::string& name);
bool is_classifier_param(const std::string& name);

}  // namespace vstain::nets

#endif  // VSTAIN_NETS_SCPA_HPP_
