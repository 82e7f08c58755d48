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

#include "vstain/nets/scpa.hpp"

#include "vstain/common.hpp"
#include "vstain/nets/attention.hpp"
#include "vstain/nets/init.hpp"

namespace vstain::nets {
namespace F = torch::nn::functional;

void to_json(nlohmann::json& j, const ScpaOptions& o) {
  j = {{"in_channels", o.in_channels}, {"patch", o.patch},
       {"embed", o.embed},             {"heads", o.heads},
       {"encoder_depth", o.encoder_depth}, {"decoder_depth", o.decoder_depth},
       {"mlp_ratio", o.mlp_ratio},     {"grid_rows", o.grid_rows},
       {"grid_cols", o.grid_cols}};
}

void from_json(const nlohmann::json& j, ScpaOptions& o) {
  o.in_channels = j.at("in_channels").get<int>();
  o.patch = j.at("patch").get<int>();
  o.embed = j.at("embed").get<int>();
  o.heads = j.at("heads").get<int>();
  o.encoder_depth = j.at("encoder_depth").get<int>();
  o.decoder_depth = j.at("decoder_depth").get<int>();
  o.mlp_ratio = j.at("mlp_ratio").get<double>();
  o.grid_rows = j.at("grid_rows").get<int>();
  o.grid_cols = j.at("grid_cols").get<int>();
}

TransformerLayerImpl::TransformerLayerImpl(int width, int heads, double mlp_ratio) : heads_(heads) {
  if (width % heads != 0) {
    throw ConfigError("embedding width " + std::to_string(width) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  const int hidden = static_cast<int>(width * mlp_ratio);
  norm1 = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({width})));
  qkv = register_module("qkv", torch::nn::Linear(width, 3 * width));
  proj = register_module("proj", torch::nn::Linear(width, width));
  norm2 = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({width})));
  fc1 = register_module("fc1", torch::nn::Linear(width, hidden));
  fc2 = register_module("fc2", torch::nn::Linear(hidden, width));
}

torch::Tensor TransformerLayerImpl::forward(const torch::Tensor& x) {
  const int64_t b = x.size(0), n = x.size(1), width = x.size(2);
  const torch::Tensor parts =
      qkv(norm1(x)).view({b, n, 3, heads_, width / heads_}).permute({2, 0, 3, 1, 4});
  const torch::Tensor attended = scaled_attention(parts[0], parts[1], parts[2]);
  torch::Tensor out = x + proj(attended.transpose(1, 2).reshape({b, n, width}));
  return out + fc2(F::gelu(fc1(norm2(out))));
}

ScpaHeadImpl::ScpaHeadImpl(ScpaOptions options) : options_(options) {
  const int p2c = options.patch * options.patch * options.in_channels;
  patch_proj = register_module("patch_proj", torch::nn::Linear(p2c, options.embed));
  pos = register_parameter("pos", torch::zeros({options.grid_rows * options.grid_cols, options.embed}));
  encoder = register_module("encoder", torch::nn::ModuleList());
  for (int i = 0; i < options.encoder_depth; ++i) {
    encoder->push_back(TransformerLayer(options.embed, options.heads, options.mlp_ratio));
  }
  class_tokens = register_parameter("class_tokens", torch::zeros({kNumLayerClasses, options.embed}));
  decoder = register_module("decoder", torch::nn::ModuleList());
  for (int i = 0; i < options.decoder_depth; ++i) {
    decoder->push_back(TransformerLayer(options.embed, options.heads, options.mlp_ratio));
  }
  mlp_hidden = register_module("mlp_hidden", torch::nn::Linear(options.embed, options.embed));
  mlp_out = register_module("mlp_out", torch::nn::Linear(options.embed, 1));
  trunc_normal_(pos);
  trunc_normal_(class_tokens);
}

TokenSequence ScpaHeadImpl::embed_patches(const torch::Tensor& features) {
  const int64_t p = options_.patch;
  const int64_t b = features.size(0), c = features.size(1), h = features.size(2), w = features.size(3);
  if (c != options_.in_channels) {
    throw ConfigError("SCPA expects " + std::to_string(options_.in_channels) +
                      " feature channels, got " + std::to_string(c));
  }
  if (h % p != 0 || w % p != 0) {
    throw ConfigError("feature map " + std::to_string(h) + "x" + std::to_string(w) +
                      " is not divisible by the patch side " + std::to_string(p));
  }
  const int64_t rows = h / p, cols = w / p;
  // [B, C, rows, P, cols, P] -> [B, rows, cols, C, P, P]: each patch flattened as (C, P, P).
  const torch::Tensor patches = features.reshape({b, c, rows, p, cols, p})
                                    .permute({0, 2, 4, 1, 3, 5})
                                    .reshape({b, rows * cols, c * p * p});
  return {patch_proj(patches), rows, cols};
}

torch::Tensor ScpaHeadImpl::position_table(int64_t rows, int64_t cols) const {
  if (rows == options_.grid_rows && cols == options_.grid_cols) return pos;
  const torch::Tensor grid =
      pos.t().reshape({1, options_.embed, options_.grid_rows, options_.grid_cols});
  return F::interpolate(grid, F::InterpolateFuncOptions()
                                  .size(std::vector<int64_t>{rows, cols})
                                  .mode(torch::kBilinear)
                                  .align_corners(false))
      .reshape({options_.embed, rows * cols})
      .t();
}

TokenSequence ScpaHeadImpl::patchify_embed(const torch::Tensor& features) {
  TokenSequence x0 = embed_patches(features);
  x0.tokens = x0.tokens + position_table(x0.rows, x0.cols);
  return x0;
}

TokenSequence ScpaHeadImpl::encode_tokens(const TokenSequence& z0) {
  torch::Tensor t = z0.tokens;
  for (const auto& layer : *encoder) t = layer->as<TransformerLayer>()->forward(t);
  return {t, z0.rows, z0.cols};
}

std::pair<TokenSequence, torch::Tensor> ScpaHeadImpl::decode(const TokenSequence& z_l) {
  const int64_t b = z_l.tokens.size(0), n = z_l.tokens.size(1);
  torch::Tensor t = torch::cat({z_l.tokens, class_tokens.unsqueeze(0).expand({b, -1, -1})}, 1);
  for (const auto& layer : *decoder) t = layer->as<TransformerLayer>()->forward(t);
  return {TokenSequence{t.narrow(1, 0, n), z_l.rows, z_l.cols}, t.narrow(1, n, kNumLayerClasses)};
}

torch::Tensor ScpaHeadImpl::segment(const TokenSequence& z_m, const torch::Tensor& classes,
                                    int64_t out_h, int64_t out_w) {
  const int64_t b = z_m.tokens.size(0);
  const torch::Tensor scores = torch::matmul(z_m.tokens, classes.transpose(1, 2));  // [B, N, 3]
  const torch::Tensor grid = scores.transpose(1, 2).reshape({b, kNumLayerClasses, z_m.rows, z_m.cols});
  return F::interpolate(grid, F::InterpolateFuncOptions()
                                  .size(std::vector<int64_t>{out_h, out_w})
                                  .mode(torch::kBilinear)
                                  .align_corners(false));
}

torch::Tensor ScpaHeadImpl::classify_pathology(const TokenSequence& z_m) {
  const torch::Tensor pooled = z_m.tokens.mean(1);
  return mlp_out(F::gelu(mlp_hidden(pooled))).squeeze(-1);
}

ScpaOutputs ScpaHeadImpl::forward(const torch::Tensor& features, int64_t out_h, int64_t out_w) {
  const TokenSequence z_l = encode_tokens(patchify_embed(features));
  auto [z_m, classes] = decode(z_l);
  ScpaOutputs out;
  out.segmentation_logits = segment(z_m, classes, out_h, out_w);
  out.pathology_logit = classify_pathology(z_m);
  out.class_embeddings = classes;
  out.z_m = std::move(z_m);
  return out;
}

bool is_segmentation_head_param(const std::string& name) {
  return name.find("scpa.class_tokens") != std::string::npos;
}

bool is_classifier_param(const std::string& name) {
  return name.find("scpa.mlp_hidden.") != std::string::npos ||
         name.find("scpa.mlp_out.") != std::string::npos;
}

}  // namespace vstain::nets
