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

#include "vstain/nets/generator.hpp"

#include "vstain/common.hpp"
#include "vstain/nets/init.hpp"

namespace vstain::nets {
namespace F = torch::nn::functional;
using torch::indexing::Slice;

namespace {

torch::nn::Conv2d conv(int in, int out, int kernel, int stride, int padding) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, kernel).stride(stride).padding(padding));
}

torch::nn::ConvTranspose2d up(int in, int out) {
  return torch::nn::ConvTranspose2d(torch::nn::ConvTranspose2dOptions(in, out, 4).stride(2).padding(1));
}

torch::Tensor inorm(const torch::Tensor& x) { return F::instance_norm(x); }

int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

}  // namespace

ScpaOptions GeneratorConfig::scpa_options() const {
  ScpaOptions o;
  o.in_channels = channels[2];
  o.patch = scpa_patch;
  o.embed = scpa_embed;
  o.heads = scpa_heads;
  o.encoder_depth = scpa_encoder_depth;
  o.decoder_depth = scpa_decoder_depth;
  o.mlp_ratio = mlp_ratio;
  o.grid_rows = o.grid_cols = static_cast<int>(ceil_div(patch_size / 8, scpa_patch));
  return o;
}

GeneratorConfig GeneratorConfig::oct_to_he() { return GeneratorConfig{}; }

GeneratorConfig GeneratorConfig::he_to_oct() {
  GeneratorConfig c;
  c.in_channels = 3;
  c.out_channels = 1;
  return c;
}

void to_json(nlohmann::json& j, const GeneratorConfig& c) {
  j = {{"in_channels", c.in_channels},
       {"out_channels", c.out_channels},
       {"channels", c.channels},
       {"attention", c.attention},
       {"rstb_count", c.rstb_count},
       {"stl_per_rstb", c.stl_per_rstb},
       {"mlp_ratio", c.mlp_ratio},
       {"scpa_patch", c.scpa_patch},
       {"scpa_embed", c.scpa_embed},
       {"scpa_heads", c.scpa_heads},
       {"scpa_encoder_depth", c.scpa_encoder_depth},
       {"scpa_decoder_depth", c.scpa_decoder_depth},
       {"patch_size", c.patch_size}};
}

void from_json(const nlohmann::json& j, GeneratorConfig& c) {
  GeneratorConfig d;
  c.in_channels = j.value("in_channels", d.in_channels);
  c.out_channels = j.value("out_channels", d.out_channels);
  c.channels = j.value("channels", d.channels);
  c.attention = j.value("attention", d.attention);
  c.rstb_count = j.value("rstb_count", d.rstb_count);
  c.stl_per_rstb = j.value("stl_per_rstb", d.stl_per_rstb);
  c.mlp_ratio = j.value("mlp_ratio", d.mlp_ratio);
  c.scpa_patch = j.value("scpa_patch", d.scpa_patch);
  c.scpa_embed = j.value("scpa_embed", d.scpa_embed);
  c.scpa_heads = j.value("scpa_heads", d.scpa_heads);
  c.scpa_encoder_depth = j.value("scpa_encoder_depth", d.scpa_encoder_depth);
  c.scpa_decoder_depth = j.value("scpa_decoder_depth", d.scpa_decoder_depth);
  c.patch_size = j.value("patch_size", d.patch_size);
}

GeneratorImpl::GeneratorImpl(GeneratorConfig config) : config_(config) {
  const auto [c1, c2, c3] = config.channels;
  enc1 = register_module("enc1", conv(config.in_channels, c1, 3, 2, 1));
  enc2 = register_module("enc2", conv(c1, c2, 3, 2, 1));
  enc3 = register_module("enc3", conv(c2, c3, 3, 2, 1));
  stb = register_module("stb", SwinBlock(SwinBlockOptions{c3, config.attention, config.rstb_count,
                                                          config.stl_per_rstb, config.mlp_ratio}));
  scpa = register_module("scpa", ScpaHead(config.scpa_options()));
  merge = register_module("merge", conv(c3 + config.scpa_embed, c3, 1, 1, 0));
  up1 = register_module("up1", up(c3, c2));
  fuse1 = register_module("fuse1", conv(2 * c2, c2, 1, 1, 0));
  up2 = register_module("up2", up(c2, c1));
  fuse2 = register_module("fuse2", conv(2 * c1, c1, 1, 1, 0));
  up3 = register_module("up3", up(c1, std::max(1, c1 / 2)));
  out = register_module("out", conv(std::max(1, c1 / 2), config.out_channels, 3, 1, 1));
  init_weights(*this);
}

MultiScaleFeatures GeneratorImpl::encode_multiscale(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != config_.in_channels) {
    throw ConfigError("generator expects [B, " + std::to_string(config_.in_channels) +
                      ", H, W] input");
  }
  if (x.size(2) % 8 != 0) {
    throw ConfigError("input height " + std::to_string(x.size(2)) + " is not divisible by 8");
  }
  if (x.size(3) % 8 != 0) {
    throw ConfigError("input width " + std::to_string(x.size(3)) + " is not divisible by 8");
  }
  MultiScaleFeatures f;
  f.levels[0] = F::leaky_relu(inorm(enc1(x)), F::LeakyReLUFuncOptions().negative_slope(0.2));
  f.levels[1] = F::leaky_relu(inorm(enc2(f.levels[0])), F::LeakyReLUFuncOptions().negative_slope(0.2));
  f.levels[2] = F::leaky_relu(inorm(enc3(f.levels[1])), F::LeakyReLUFuncOptions().negative_slope(0.2));
  return f;
}

torch::Tensor GeneratorImpl::bottleneck(const MultiScaleFeatures& features) {
  return stb(features.levels[2]);
}

torch::Tensor GeneratorImpl::latent(const torch::Tensor& x) {
  return bottleneck(encode_multiscale(x));
}

ScpaOutputs GeneratorImpl::run_scpa(const MultiScaleFeatures& features, int64_t height,
                                    int64_t width) {
  const torch::Tensor& coarse = features.levels[2];
  const int64_t p = config_.scpa_patch;
  const int64_t h = coarse.size(2), w = coarse.size(3);
  const int64_t ph = ceil_div(h, p) * p, pw = ceil_div(w, p) * p;
  torch::Tensor padded = coarse;
  if (ph != h || pw != w) padded = torch::constant_pad_nd(coarse, {0, pw - w, 0, ph - h});
  ScpaOutputs out = scpa(padded, ph * 8, pw * 8);
  if (ph != h || pw != w) {
    out.segmentation_logits =
        out.segmentation_logits.index({Slice(), Slice(), Slice(0, height), Slice(0, width)});
  }
  return out;
}

torch::Tensor GeneratorImpl::decode(const MultiScaleFeatures& features, const torch::Tensor& stb_out,
                                    const ScpaOutputs& scpa_out) {
  const int64_t p = config_.scpa_patch;
  const int64_t h = features.levels[2].size(2), w = features.levels[2].size(3);
  const TokenSequence& z_m = scpa_out.z_m;
  if (z_m.rows != ceil_div(h, p) || z_m.cols != ceil_div(w, p) ||
      z_m.tokens.size(1) != z_m.rows * z_m.cols) {
    throw ConfigError("SCPA token grid " + std::to_string(z_m.rows) + "x" + std::to_string(z_m.cols) +
                      " does not match feature map " + std::to_string(h) + "x" + std::to_string(w));
  }
  const int64_t b = z_m.tokens.size(0);
  torch::Tensor zmap = z_m.tokens.transpose(1, 2).reshape({b, -1, z_m.rows, z_m.cols});
  zmap = zmap.repeat_interleave(p, 2).repeat_interleave(p, 3).index(
      {Slice(), Slice(), Slice(0, h), Slice(0, w)});

  torch::Tensor t = F::relu(merge(torch::cat({stb_out, zmap}, 1)));
  t = F::relu(inorm(up1(t)));
  t = F::relu(fuse1(torch::cat({t, features.levels[1]}, 1)));
  t = F::relu(inorm(up2(t)));
  t = F::relu(fuse2(torch::cat({t, features.levels[0]}, 1)));
  t = F::relu(inorm(up3(t)));
  return torch::sigmoid(out(t));
}

GeneratorOutput GeneratorImpl::forward(const torch::Tensor& x) {
  const MultiScaleFeatures f = encode_multiscale(x);
  GeneratorOutput o;
  o.latent = bottleneck(f);
  o.scpa = run_scpa(f, x.size(2), x.size(3));
  o.image = decode(f, o.latent, o.scpa);
  return o;
}

}  // namespace vstain::nets
