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

#include "vstain/nets/attention.hpp"

#include <cmath>

#include "vstain/common.hpp"
#include "vstain/nets/init.hpp"

namespace vstain::nets {

void to_json(nlohmann::json& j, const AttentionParams& p) {
  j = {{"window_size", p.window_size}, {"num_heads", p.num_heads}, {"head_dim", p.head_dim}};
}

void from_json(const nlohmann::json& j, AttentionParams& p) {
  p.window_size = j.at("window_size").get<int>();
  p.num_heads = j.at("num_heads").get<int>();
  p.head_dim = j.at("head_dim").get<int>();
}

torch::Tensor scaled_attention(const torch::Tensor& q, const torch::Tensor& k,
                               const torch::Tensor& v, const torch::Tensor& bias,
                               const torch::Tensor& mask) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.size(-1)));
  torch::Tensor logits = torch::matmul(q, k.transpose(-2, -1)) * scale;
  if (bias.defined()) logits = logits + bias;
  if (mask.defined()) logits = logits + mask;
  return torch::matmul(torch::softmax(logits, -1), v);
}

torch::Tensor relative_position_index(int window_size) {
  const int n = window_size;
  const int tokens = n * n;
  torch::Tensor index = torch::empty({tokens, tokens}, torch::kLong);
  auto acc = index.accessor<int64_t, 2>();
  for (int i = 0; i < tokens; ++i) {
    for (int j = 0; j < tokens; ++j) {
      const int dy = i / n - j / n + n - 1;
      const int dx = i % n - j % n + n - 1;
      acc[i][j] = static_cast<int64_t>(dy) * (2 * n - 1) + dx;
    }
  }
  return index;
}

torch::Tensor window_partition(const torch::Tensor& x, int window_size) {
  const int64_t b = x.size(0), h = x.size(1), w = x.size(2), c = x.size(3);
  return x.view({b, h / window_size, window_size, w / window_size, window_size, c})
      .permute({0, 1, 3, 2, 4, 5})
      .reshape({-1, static_cast<int64_t>(window_size) * window_size, c});
}

torch::Tensor window_reverse(const torch::Tensor& windows, int window_size, int64_t batch,
                             int64_t height, int64_t width) {
  const int64_t c = windows.size(-1);
  return windows.view({batch, height / window_size, width / window_size, window_size, window_size, c})
      .permute({0, 1, 3, 2, 4, 5})
      .reshape({batch, height, width, c});
}

WindowAttentionImpl::WindowAttentionImpl(AttentionParams params) : params_(params) {
  if (params.window_size < 1 || params.num_heads < 1 || params.head_dim < 1) {
    throw ConfigError("attention window, heads and head_dim must be positive");
  }
  const int width = params.width();
  qkv = register_module("qkv", torch::nn::Linear(width, 3 * width));
  proj = register_module("proj", torch::nn::Linear(width, width));
  const int span = 2 * params.window_size - 1;
  bias_table = register_parameter("relative_position_bias_table",
                                  torch::zeros({span * span, params.num_heads}));
  trunc_normal_(bias_table);
  index_ = relative_position_index(params.window_size);
}

torch::Tensor WindowAttentionImpl::expanded_bias() const {
  const int64_t tokens = params_.tokens_per_window();
  return bias_table.index_select(0, index_.view({-1}))
      .view({tokens, tokens, params_.num_heads})
      .permute({2, 0, 1});
}

torch::Tensor WindowAttentionImpl::forward(const torch::Tensor& windows, const torch::Tensor& mask) {
  const int64_t bw = windows.size(0), tokens = windows.size(1), width = windows.size(2);
  if (width % params_.num_heads != 0 || width != params_.width()) {
    throw ConfigError("token width " + std::to_string(width) + " is not num_heads (" +
                      std::to_string(params_.num_heads) + ") x head_dim (" +
                      std::to_string(params_.head_dim) + ")");
  }
  if (tokens != params_.tokens_per_window()) {
    throw ConfigError("window holds " + std::to_string(tokens) + " tokens, expected " +
                      std::to_string(params_.tokens_per_window()));
  }
  const int64_t heads = params_.num_heads, d = params_.head_dim;
  torch::Tensor qkv_out = qkv(windows).view({bw, tokens, 3, heads, d}).permute({2, 0, 3, 1, 4});
  torch::Tensor m;
  if (mask.defined()) {
    // [nW, T, T] -> [B, nW, 1, T, T] broadcast per batch element.
    const int64_t n_windows = mask.size(0);
    m = mask.view({1, n_windows, 1, tokens, tokens})
            .expand({bw / n_windows, n_windows, heads, tokens, tokens})
            .reshape({bw, heads, tokens, tokens});
  }
  torch::Tensor out = scaled_attention(qkv_out[0], qkv_out[1], qkv_out[2], expanded_bias(), m);
  return proj(out.transpose(1, 2).reshape({bw, tokens, width}));
}

}  // namespace vstain::nets
