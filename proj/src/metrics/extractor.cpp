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

#include "vstain/metrics/extractor.hpp"

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <random>

#include "vstain/common.hpp"
#include "vstain/nets/checkpoint.hpp"
#include "vstain/nets/init.hpp"

#ifndef VSTAIN_ASSET_DIR
#define VSTAIN_ASSET_DIR "assets"
#endif

namespace vstain::metrics {
namespace {

torch::nn::Conv2d tap(int in, int out) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).stride(2).padding(1));
}

nlohmann::json architecture() {
  return {{"channels", FeatureExtractorImpl::kChannels}, {"kernel", 3}, {"stride", 2}, {"activation", "tanh"}};
}

class Normal {
 public:
  explicit Normal(std::uint64_t seed) : rng_(seed) {}
  double next() {
    if (spare_) {
      spare_ = false;
      return cached_;
    }
    // Uniforms in (0, 1) from the top 53 bits.
    const double u1 = (static_cast<double>(rng_() >> 11) + 0.5) * 0x1.0p-53;
    const double u2 = (static_cast<double>(rng_() >> 11) + 0.5) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    cached_ = r * std::sin(2.0 * std::numbers::pi * u2);
    spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 rng_;
  bool spare_ = false;
  double cached_ = 0.0;
};

void fill(torch::Tensor t, Normal& normal, double std) {
  torch::NoGradGuard no_grad;
  auto flat = t.view({-1});
  auto a = flat.accessor<float, 1>();
  for (int64_t i = 0; i < flat.size(0); ++i) a[i] = static_cast<float>(std * normal.next());
}

}  // namespace

FeatureExtractorImpl::FeatureExtractorImpl() {
  c1 = register_module("c1", tap(3, kChannels[0]));
  c2 = register_module("c2", tap(kChannels[0], kChannels[1]));
  c3 = register_module("c3", tap(kChannels[1], kChannels[2]));
  for (auto& p : parameters()) p.set_requires_grad(false);
  eval();
}

std::array<torch::Tensor, 3> FeatureExtractorImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 4 || (x.size(1) != 1 && x.size(1) != 3)) {
    throw ConfigError("feature extractor expects [B, 1 or 3, H, W] input");
  }
  torch::Tensor in = x.to(c1->weight.scalar_type());
  if (in.size(1) == 1) in = in.expand({-1, 3, -1, -1});
  const torch::Tensor l1 = torch::tanh(c1(in * 2.0 - 1.0));
  const torch::Tensor l2 = torch::tanh(c2(l1));
  const torch::Tensor l3 = torch::tanh(c3(l2));
  return {l1, l2, l3};
}

torch::Tensor FeatureExtractorImpl::pooled_features(const torch::Tensor& x) {
  torch::NoGradGuard no_grad;
  const auto levels = forward(x);
  std::vector<torch::Tensor> parts;
  for (const auto& l : levels) parts.push_back(l.mean({2, 3}));
  return torch::cat(parts, 1).to(torch::kDouble);
}

FeatureExtractor make_extractor(std::uint64_t seed) {
  FeatureExtractor e;
  Normal normal(seed);
  for (auto& item : e->named_parameters()) {
    const torch::Tensor& p = item.value();
    if (p.dim() == 4) {
      fill(p, normal, 1.0 / std::sqrt(static_cast<double>(p.size(1) * p.size(2) * p.size(3))));
    } else {
      fill(p, normal, 0.01);
    }
  }
  return e;
}

std::filesystem::path default_extractor_stem() {
  const char* env = std::getenv("VSTAIN_ASSET_DIR");
  const std::filesystem::path dir = (env && *env) ? env : VSTAIN_ASSET_DIR;
  return dir / "feature_extractor";
}

FeatureExtractor load_extractor(const std::filesystem::path& stem) {
  FeatureExtractor e;
  nets::load_module(*e, kExtractorKind, architecture(), stem);
  const std::string sum = nets::parameter_checksum(*e);
  if (sum != kExtractorChecksum) {
    throw ConfigError("feature extractor " + stem.string() + " has checksum " + sum + ", expected " +
                      kExtractorChecksum);
  }
  for (auto& p : e->parameters()) p.set_requires_grad(false);
  e->eval();
  return e;
}

void save_extractor(const FeatureExtractorImpl& extractor, const std::filesystem::path& stem) {
  nets::save_module(extractor, kExtractorKind, architecture(), stem);
}

}  // namespace vstain::metrics
