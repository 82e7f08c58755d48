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

#include "vstain/nets/swin.hpp"

#include <vector>

namespace vstain::nets {
namespace F = torch::nn::functional;

namespace {

int64_t round_up(int64_t v, int64_t m) { return (v + m - 1) / m * m; }

// Region id along one axis of the rolled grid, following the three slices a
// cyclic shift produces.
int region_of(int64_t pos, int64_t size, int window, int shift) {
  if (shift == 0) return 0;
  if (pos < size - window) return 0;
  if (pos < size - shift) return 1;
  return 2;
}

}  // namespace

SwinLayerImpl::SwinLayerImpl(SwinLayerOptions options) : options_(options) {
  const int width = options.attention.width();
  const int hidden = static_cast<int>(width * options.mlp_ratio);
  norm1 = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({width})));
  attn = register_module("attn", WindowAttention(options.attention));
  norm2 = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({width})));
  fc1 = register_module("fc1", torch::nn::Linear(width, hidden));
  fc2 = register_module("fc2", torch::nn::Linear(hidden, width));
}

int SwinLayerImpl::shift_for(int64_t height, int64_t width) const {
  const int window = options_.attention.window_size;
  if (!options_.shifted || std::min(height, width) <= window) return 0;
  return window / 2;
}

torch::Tensor SwinLayerImpl::attention_mask(int64_t height, int64_t width, int64_t valid_h,
                                            int64_t valid_w, torch::Dtype dtype) {
  const int window = options_.attention.window_size;
  const int shift = shift_for(height, width);
  if (shift == 0 && valid_h == height && valid_w == width) return {};
  const auto key = std::make_tuple(height, width, valid_h, valid_w, static_cast<int>(dtype));
  if (auto it = mask_cache_.find(key); it != mask_cache_.end()) return it->second;

  // Per rolled-grid position: region label and whether it holds a real token.
  torch::Tensor region = torch::empty({1, height, width, 1}, torch::kDouble);
  torch::Tensor valid = torch::empty({1, height, width, 1}, torch::kDouble);
  auto r_acc = region.accessor<double, 4>();
  auto v_acc = valid.accessor<double, 4>();
  for (int64_t y = 0; y < height; ++y) {
    for (int64_t x = 0; x < width; ++x) {
      r_acc[0][y][x][0] = region_of(y, height, window, shift) * 3 + region_of(x, width, window, shift);
      const int64_t oy = (y + shift) % height, ox = (x + shift) % width;
      v_acc[0][y][x][0] = (oy < valid_h && ox < valid_w) ? 1.0 : 0.0;
    }
  }
  const torch::Tensor rw = window_partition(region, window).squeeze(-1);  // [nW, T]
  const torch::Tensor vw = window_partition(valid, window).squeeze(-1);
  const torch::Tensor different = rw.unsqueeze(2).ne(rw.unsqueeze(1));
  const torch::Tensor padded_key = vw.unsqueeze(1).eq(0.0).expand_as(different);
  torch::Tensor mask = torch::zeros(different.sizes(), torch::kDouble)
                           .masked_fill(different.logical_or(padded_key), kMaskedLogit)
                           .to(dtype);
  mask_cache_.emplace(key, mask);
  return mask;
}

torch::Tensor SwinLayerImpl::forward(const torch::Tensor& x, int64_t valid_h, int64_t valid_w) {
  const int window = options_.attention.window_size;
  const int64_t b = x.size(0), h = x.size(1), w = x.size(2), c = x.size(3);
  const int shift = shift_for(h, w);
  torch::Tensor t = norm1(x);
  if (shift > 0) t = torch::roll(t, {-shift, -shift}, {1, 2});
  torch::Tensor windows = window_partition(t, window);
  windows = attn(windows, attention_mask(h, w, valid_h, valid_w, x.scalar_type()));
  t = window_reverse(windows, window, b, h, w).view({b, h, w, c});
  if (shift > 0) t = torch::roll(t, {shift, shift}, {1, 2});
  torch::Tensor out = x + t;
  return out + fc2(F::gelu(fc1(norm2(out))));
}

ResidualSwinBlockImpl::ResidualSwinBlockImpl(ResidualSwinOptions options) : options_(options) {
  layers = register_module("layers", torch::nn::ModuleList());
  for (int i = 0; i < options.layers; ++i) {
    layers->push_back(SwinLayer(SwinLayerOptions{options.attention, i % 2 == 1, options.mlp_ratio}));
  }
  const int width = options.attention.width();
  conv = register_module("conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(width, width, 3).padding(1)));
}

torch::Tensor ResidualSwinBlockImpl::layer_features(const torch::Tensor& x) {
  const int window = options_.attention.window_size;
  const int64_t h = x.size(2), w = x.size(3);
  const int64_t hp = round_up(h, window), wp = round_up(w, window);
  torch::Tensor tokens = x.permute({0, 2, 3, 1});
  if (hp != h || wp != w) tokens = torch::constant_pad_nd(tokens, {0, 0, 0, wp - w, 0, hp - h});
  for (const auto& layer : *layers) tokens = layer->as<SwinLayer>()->forward(tokens, h, w);
  using torch::indexing::Slice;
  tokens = tokens.index({Slice(), Slice(0, h), Slice(0, w), Slice()});
  return tokens.permute({0, 3, 1, 2});
}

torch::Tensor ResidualSwinBlockImpl::forward(const torch::Tensor& x) {
  return conv(layer_features(x) + x);
}

SwinBlockImpl::SwinBlockImpl(SwinBlockOptions options) {
  const int width = options.attention.width();
  proj_in = register_module("proj_in", torch::nn::Conv2d(torch::nn::Conv2dOptions(options.channels, width, 1)));
  blocks = register_module("blocks", torch::nn::ModuleList());
  for (int i = 0; i < options.blocks; ++i) {
    blocks->push_back(ResidualSwinBlock(
        ResidualSwinOptions{options.attention, options.layers_per_block, options.mlp_ratio}));
  }
  proj_out = register_module("proj_out", torch::nn::Conv2d(torch::nn::Conv2dOptions(width, options.channels, 1)));
}

torch::Tensor SwinBlockImpl::forward(const torch::Tensor& x) {
  torch::Tensor t = proj_in(x);
  for (const auto& block : *blocks) t = block->as<ResidualSwinBlock>()->forward(t);
  return x + proj_out(t);
}

}  // namespace vstain::nets
