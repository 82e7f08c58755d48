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

#ifndef VSTAIN_NETS_ATTENTION_HPP_
#define VSTAIN_NETS_ATTENTION_HPP_

#include <torch/torch.h>

#include "nlohmann/json.hpp"

namespace vstain::nets {

// Additive logit used to exclude keys (other shift regions, padding).
inline constexpr double kMaskedLogit = -1.0e4;

struct AttentionParams {
  int window_size = 8;  // tokens per window side
  int num_heads = 4;
  int head_dim = 16;

  int width() const { return num_heads * head_dim; }
  int tokens_per_window() const { return window_size * window_size; }
  bool operator==(const AttentionParams&) const = default;
};

void to_json(nlohmann::json& j, const AttentionParams& p);
void from_json(const nlohmann::json& j, AttentionParams& p);

// SoftMax(q k^T / sqrt(d) + bias + mask) v over the key axis.
//   q, k, v: [batch, heads, tokens, d]
//   bias:    [heads, tokens, tokens] or undefined
//   mask:    broadcastable to [batch, heads, tokens, tokens] or undefined
torch::Tensor scaled_attention(const torch::Tensor& q, const torch::Tensor& k,
                               const torch::Tensor& v, const torch::Tensor& bias = {},
                               const torch::Tensor& mask = {});

// Row-major pairwise index into a (2N-1)^2 relative-offset table: entry
// [i, j] = (dy + N - 1) * (2N - 1) + (dx + N - 1) for tokens i, j of a window.
torch::Tensor relative_position_index(int window_size);

// [B, H, W, C] -> [B * nW, N*N, C] with windows in row-major order.
torch::Tensor window_partition(const torch::Tensor& x, int window_size);
// Inverse of window_partition.
torch::Tensor window_reverse(const torch::Tensor& windows, int window_size, int64_t batch,
                             int64_t height, int64_t width);

// Multi-head self-attention inside one window with a learnable relative
// position bias table per head.
class WindowAttentionImpl : public torch::nn::Module {
 public:
  explicit WindowAttentionImpl(AttentionParams params);

  // windows: [B * nW, N*N, C]; mask: [nW, N*N, N*N] additive or undefined.
  torch::Tensor forward(const torch::Tensor& windows, const torch::Tensor& mask = {});

  // Gathered bias B, [heads, N*N, N*N].
  torch::Tensor expanded_bias() const;

  const AttentionParams& params() const { return params_; }

  torch::nn::Linear qkv{nullptr};
  torch::nn::Linear proj{nullptr};
  torch::Tensor bias_table;  // [(2N-1)^2, heads]

 private:
  AttentionParams params_;
  torch::Tensor index_;  // [N*N, N*N], int64; derived, not serialized
};
TORCH_MODULE(WindowAttention);

}  // namespace vstain::nets

#endif  // VSTAIN_NETS_ATTENTION_HPP_
