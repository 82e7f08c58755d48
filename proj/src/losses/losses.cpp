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

#include "vstain/losses/losses.hpp"

#include <cmath>

#include "vstain/common.hpp"

namespace vstain::losses {
namespace F = torch::nn::functional;

void LossWeights::validate() const {
  const std::array<std::pair<const char*, double>, 4> all = {
      {{"alpha", alpha}, {"beta", beta}, {"gamma", gamma}, {"iota", iota}}};
  for (const auto& [name, v] : all) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ConfigError(std::string("loss weight ") + name + " must be finite and nonnegative");
    }
  }
}

void to_json(nlohmann::json& j, const LossWeights& w) {
  j = {{"alpha", w.alpha}, {"beta", w.beta}, {"gamma", w.gamma}, {"iota", w.iota}};
}

void from_json(const nlohmann::json& j, LossWeights& w) {
  LossWeights d;
  w.alpha = j.value("alpha", d.alpha);
  w.beta = j.value("beta", d.beta);
  w.gamma = j.value("gamma", d.gamma);
  w.iota = j.value("iota", d.iota);
}

namespace {

double scalar(const torch::Tensor& t) { return t.defined() ? t.item<double>() : 0.0; }

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (a.sizes() != b.sizes()) {
    throw ConfigError(std::string(what) + ": shape mismatch " + c10::str(a.sizes()) + " vs " +
                      c10::str(b.sizes()));
  }
}

}  // namespace

LossParts LossTerms::values() const {
  return {scalar(adv_OH), scalar(adv_HO), scalar(cycle), scalar(embedding), scalar(sc), scalar(pa)};
}

torch::Tensor adversarial_loss(const torch::Tensor& real, const torch::Tensor& fake, AdversarialSide side) {
  if (side == AdversarialSide::kGenerator) return (fake - 1.0).pow(2).mean();
  require_same_shape(real, fake, "adversarial_loss");
  return 0.5 * (real - 1.0).pow(2).mean() + 0.5 * fake.pow(2).mean();
}

torch::Tensor cycle_loss(const torch::Tensor& x, const torch::Tensor& x_reconstructed) {
  require_same_shape(x, x_reconstructed, "cycle_loss");
  return (x - x_reconstructed).abs().mean();
}

torch::Tensor embedding_loss(const torch::Tensor& latent_a, const torch::Tensor& latent_b) {
  require_same_shape(latent_a, latent_b, "embedding_loss");
  return (latent_a - latent_b).pow(2).mean();
}

torch::Tensor structural_constraint_loss(const torch::Tensor& seg_logits, const torch::Tensor& layer_mask,
                                         const torch::Tensor& normal_flags) {
  if (seg_logits.dim() != 4 || seg_logits.size(1) != 3) {
    throw ConfigError("structural_constraint_loss expects [B, 3, H, W] logits, got " +
                      c10::str(seg_logits.sizes()));
  }
  const torch::Tensor mask = layer_mask.to(torch::kLong);
  if (mask.dim() != 3 || mask.size(0) != seg_logits.size(0) || mask.size(1) != seg_logits.size(2) ||
      mask.size(2) != seg_logits.size(3)) {
    throw ConfigError("layer mask " + c10::str(mask.sizes()) + " does not match logits " +
                      c10::str(seg_logits.sizes()));
  }
  if (mask.numel() > 0 && (mask.min().item<int64_t>() < 0 || mask.max().item<int64_t>() > 2)) {
    throw ConfigError("layer labels must lie in {0, 1, 2}");
  }
  const torch::Tensor flags = normal_flags.to(torch::kBool);
  if (flags.numel() != seg_logits.size(0)) throw ConfigError("one normal flag per image is required");
  if (!flags.any().item<bool>()) return torch::zeros({}, seg_logits.options());
  const torch::Tensor per_image =
      F::cross_entropy(seg_logits, mask, F::CrossEntropyFuncOptions().reduction(torch::kNone)).mean({1, 2});
  return per_image.masked_select(flags).mean();
}

torch::Tensor pathology_awareness_loss(const torch::Tensor& logit, const torch::Tensor& label) {
  const torch::Tensor y = label.to(logit.scalar_type()).reshape(logit.sizes());
  if (!(y.eq(0) | y.eq(1)).all().item<bool>()) throw ConfigError("pathology labels must be 0 or 1");
  return F::binary_cross_entropy_with_logits(logit, y);
}

LossRecord total_loss(const LossParts& parts, const LossWeights& weights) {
  const auto values = parts.values();
  for (size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) throw NonFiniteLoss(kTermNames[i], values[i]);
  }
  LossRecord r;
  static_cast<LossParts&>(r) = parts;
  r.total = parts.adv_OH + parts.adv_HO + weights.alpha * parts.cycle + weights.beta * parts.embedding +
            weights.gamma * parts.sc + weights.iota * parts.pa;
  if (!std::isfinite(r.total)) throw NonFiniteLoss("total", r.total);
  return r;
}

torch::Tensor weighted_sum(const LossTerms& t, const LossWeights& w) {
  torch::Tensor sum;
  auto add = [&](const torch::Tensor& term, double coeff) {
    if (!term.defined() || coeff == 0.0) return;
    sum = sum.defined() ? sum + coeff * term : coeff * term;
  };
  add(t.adv_OH, 1.0);
  add(t.adv_HO, 1.0);
  add(t.cycle, w.alpha);
  add(t.embedding, w.beta);
  add(t.sc, w.gamma);
  add(t.pa, w.iota);
  return sum.defined() ? sum : torch::zeros({});
}

}  // namespace vstain::losses
