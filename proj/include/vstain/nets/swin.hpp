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

#ifndef VSTAIN_NETS_SWIN_HPP_
#define VSTAIN_NETS_SWIN_HPP_

#include <torch/torch.h>

#include <map>
#include <tuple>

#include "vstain/nets/attention.hpp"

namespace vstain::nets {

struct SwinLayerOptions {
  AttentionParams attention;
  bool shifted = false;
  double mlp_ratio = 4.0;
};

// One Swin transformer layer (STL):
//   x = x + proj(W-MSA(LN(x)))    windows shifted by N/2 on odd layers
//   x = x + fc2(GELU(fc1(LN(x))))
// Operates on a token grid [B, H, W, C] whose sides are multiples of the
// window size; tokens outside (valid_h, valid_w) are padding and are never
// attended to.
class SwinLayerImpl : public torch::nn::Module {
 public:
  explicit SwinLayerImpl(SwinLayerOptions options);

  torch::Tensor forward(const torch::Tensor& x, int64_t valid_h, int64_t valid_w);

  // Shift actually applied for a padded grid of this size (0 when the grid
  // fits in one window).
  int shift_for(int64_t height, int64_t width) const;

  // Additive mask [nW, T, T] for the given grid, undefined when nothing is masked.
  torch::Tensor attention_mask(int64_t height, int64_t width, int64_t valid_h, int64_t valid_w,
                               torch::Dtype dtype);

  const SwinLayerOptions& options() const { return options_; }

  torch::nn::LayerNorm norm1{nullptr};
  WindowAttention attn{nullptr};
  torch::nn::LayerNorm norm2{nullptr};
  torch::nn::Linear fc1{nullptr};
  torch::nn::Linear fc2{nullptr};

 private:
  SwinLayerOptions options_;
  std::map<std::tuple<int64_t, int64_t, int64_t, int64_t, int>, torch::Tensor> mask_cache_;
};
TORCH_MODULE(SwinLayer);

struct ResidualSwinOptions {
  AttentionParams attention;
  int layers = 4;
  double mlp_ratio = 4.0;
};

// Residual Swin transformer sub-block: T_out = Conv3x3(F_stl + T_in), where
// F_stl runs the layer stack (alternating plain and shifted windows) over the
// zero-padded token grid.
class ResidualSwinBlockImpl : public torch::nn::Module {
 public:
  explicit ResidualSwinBlockImpl(ResidualSwinOptions options);

  // x: [B, C, H, W] with C = heads * head_dim.
  torch::Tensor forward(const torch::Tensor& x);
  // F_stl in [B, C, H, W] layout (before the residual add and conv).
  torch::Tensor layer_features(const torch::Tensor& x);

  torch::nn::ModuleList layers{nullptr};
  torch::nn::Conv2d conv{nullptr};

 private:
  ResidualSwinOptions options_;
};
TORCH_MODULE(ResidualSwinBlock);

struct SwinBlockOptions {
  int channels = 128;  // feature channels entering/leaving the block
  AttentionParams attention;
  int blocks = 2;
  int layers_per_block = 4;
  double mlp_ratio = 4.0;
};

// Swin transformer block (STB): x + proj_out(RSTB_n(...RSTB_1(proj_in(x)))).
class SwinBlockImpl : public torch::nn::Module {
 public:
  explicit SwinBlockImpl(SwinBlockOptions options);

  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d proj_in{nullptr};
  torch::nn::ModuleList blocks{nullptr};
  torch::nn::Conv2d proj_out{nullptr};
};
TORCH_MODULE(SwinBlock);

}  // namespace vstain::nets

#endif  // VSTAIN_NETS_SWIN_HPP_
