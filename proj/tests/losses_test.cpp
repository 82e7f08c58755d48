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

#include <torch/torch.h>

#include <cmath>
#include <limits>

#include "gtest/gtest.h"
#include "oracles.hpp"
#include "vstain/common.hpp"
#include "vstain/losses/losses.hpp"

namespace vstain::losses {
namespace {

constexpr double kLn2 = 0.69314718055994530942;
constexpr double kLn3 = 1.09861228866810969140;

torch::Tensor rnd(std::vector<int64_t> shape) { return torch::randn(shape, torch::kDouble); }

TEST(AdversarialLossTest, PerfectCases) {
  const torch::Tensor ones = torch::ones({2, 1, 4, 4}, torch::kDouble);
  const torch::Tensor zeros = torch::zeros({2, 1, 4, 4}, torch::kDouble);
  EXPECT_EQ(adversarial_loss(ones, zeros, AdversarialSide::kDiscriminator).item<double>(), 0.0);
  EXPECT_EQ(adversarial_loss({}, ones, AdversarialSide::kGenerator).item<double>(), 0.0);
}

TEST(AdversarialLossTest, MatchesScalarLoop) {
  torch::manual_seed(1);
  const torch::Tensor real = rnd({1, 1, 2, 2}), fake = rnd({1, 1, 2, 2});
  const auto r = oracle::to_vec(real), f = oracle::to_vec(fake);
  double d = 0.0, g = 0.0;
  for (int i = 0; i < 4; ++i) {
    d += 0.5 * (r[i] - 1) * (r[i] - 1) / 4 + 0.5 * f[i] * f[i] / 4;
    g += (f[i] - 1) * (f[i] - 1) / 4;
  }
  EXPECT_NEAR(adversarial_loss(real, fake, AdversarialSide::kDiscriminator).item<double>(), d, 1e-7);
  EXPECT_NEAR(adversarial_loss(real, fake, AdversarialSide::kGenerator).item<double>(), g, 1e-7);
}

TEST(AdversarialLossTest, RejectsShapeMismatch) {
  EXPECT_THROW(adversarial_loss(rnd({1, 1, 2, 2}), rnd({1, 1, 3, 2}), AdversarialSide::kDiscriminator),
               ConfigError);
}

TEST(CycleLossTest, Anchors) {
  const torch::Tensor x = rnd({1, 3, 4, 4});
  EXPECT_EQ(cycle_loss(x, x).item<double>(), 0.0);
  EXPECT_EQ(cycle_loss(torch::zeros({1, 3, 4, 4}), torch::ones({1, 3, 4, 4})).item<double>(), 1.0);
  EXPECT_THROW(cycle_loss(x, rnd({1, 1, 4, 4})), ConfigError);
}

TEST(CycleLossTest, MatchesLoopMae) {
  torch::manual_seed(2);
  const torch::Tensor a = rnd({2, 3, 5, 5}), b = rnd({2, 3, 5, 5});
  const auto va = oracle::to_vec(a), vb = oracle::to_vec(b);
  double s = 0.0;
  for (size_t i = 0; i < va.size(); ++i) s += std::abs(va[i] - vb[i]);
  EXPECT_NEAR(cycle_loss(a, b).item<double>(), s / va.size(), 1e-12);
}

TEST(EmbeddingLossTest, Anchors) {
  const torch::Tensor z = rnd({1, 8, 3, 3});
  EXPECT_EQ(embedding_loss(z, z).item<double>(), 0.0);
  EXPECT_NEAR(embedding_loss(z, z + 2.0).item<double>(), 4.0, 1e-12);
  EXPECT_THROW(embedding_loss(z, rnd({1, 8, 3, 4})), ConfigError);
}

TEST(EmbeddingLossTest, MatchesLoopMse) {
  torch::manual_seed(3);
  const torch::Tensor a = rnd({2, 4, 3, 3}), b = rnd({2, 4, 3, 3});
  const auto va = oracle::to_vec(a), vb = oracle::to_vec(b);
  double s = 0.0;
  for (size_t i = 0; i < va.size(); ++i) s += (va[i] - vb[i]) * (va[i] - vb[i]);
  EXPECT_NEAR(embedding_loss(a, b).item<double>(), s / va.size(), 1e-12);
}

TEST(StructuralConstraintLossTest, UniformLogitsGiveLn3) {
  torch::manual_seed(4);
  for (int trial = 0; trial < 5; ++trial) {
    const torch::Tensor mask = torch::randint(0, 3, {2, 6, 6});
    const double v = structural_constraint_loss(torch::full({2, 3, 6, 6}, 0.3 * trial, torch::kDouble), mask,
                                                torch::tensor({true, true}))
                         .item<double>();
    EXPECT_NEAR(v, kLn3, 1e-6);
  }
}

TEST(StructuralConstraintLossTest, PerfectPredictionApproachesZero) {
  const torch::Tensor mask = torch::randint(0, 3, {1, 5, 5});
  const torch::Tensor logits =
      40.0 * torch::one_hot(mask, 3).permute({0, 3, 1, 2}).to(torch::kDouble);
  EXPECT_LT(structural_constraint_loss(logits, mask, torch::tensor({true})).item<double>(), 1e-6);
}

TEST(StructuralConstraintLossTest, MatchesLoopCrossEntropyOnNormalImages) {
  torch::manual_seed(5);
  const torch::Tensor logits = rnd({3, 3, 4, 4});
  const torch::Tensor mask = torch::randint(0, 3, {3, 4, 4});
  const torch::Tensor flags = torch::tensor({true, false, true});
  auto la = logits.accessor<double, 4>();
  auto ma = mask.accessor<int64_t, 3>();
  double sum = 0.0;
  for (int b : {0, 2}) {
    double img = 0.0;
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) img += oracle::cross_entropy({la[b][0][y][x], la[b][1][y][x], la[b][2][y][x]}, ma[b][y][x]);
    sum += img / 16.0;
  }
  EXPECT_NEAR(structural_constraint_loss(logits, mask, flags).item<double>(), sum / 2.0, 1e-6);
}

TEST(StructuralConstraintLossTest, NoNormalImagesGivesZero) {
  EXPECT_EQ(structural_constraint_loss(rnd({2, 3, 4, 4}), torch::zeros({2, 4, 4}, torch::kLong),
                                       torch::tensor({false, false}))
                .item<double>(),
            0.0);
}

TEST(StructuralConstraintLossTest, RejectsBadLabelsAndShapes) {
  torch::Tensor mask = torch::zeros({1, 4, 4}, torch::kLong);
  mask[0][1][1] = 3;
  EXPECT_THROW(structural_constraint_loss(rnd({1, 3, 4, 4}), mask, torch::tensor({true})), ConfigError);
  mask[0][1][1] = -1;
  EXPECT_THROW(structural_constraint_loss(rnd({1, 3, 4, 4}), mask, torch::tensor({true})), ConfigError);
  EXPECT_THROW(structural_constraint_loss(rnd({1, 2, 4, 4}), torch::zeros({1, 4, 4}), torch::tensor({true})),
               ConfigError);
  EXPECT_THROW(structural_constraint_loss(rnd({1, 3, 4, 4}), torch::zeros({1, 4, 5}), torch::tensor({true})),
               ConfigError);
}

TEST(StructuralConstraintLossTest, GradientIsSoftmaxMinusOneHot) {
  torch::manual_seed(6);
  const torch::Tensor logits = rnd({1, 3, 3, 3}).requires_grad_(true);
  const torch::Tensor mask = torch::randint(0, 3, {1, 3, 3});
  structural_constraint_loss(logits, mask, torch::tensor({true})).backward();
  const torch::Tensor expected =
      (torch::softmax(logits.detach(), 1) - torch::one_hot(mask, 3).permute({0, 3, 1, 2}).to(torch::kDouble)) / 9.0;
  EXPECT_LT((logits.grad() - expected).abs().max().item<double>(), 1e-12);
  // Central differences against the same gradient.
  torch::Tensor probe = logits.detach().clone();
  auto flat = probe.view({-1});
  for (int64_t i = 0; i < flat.numel(); i += 4) {
    const double orig = flat[i].item<double>(), eps = 1e-6;
    flat[i] = orig + eps;
    const double up = structural_constraint_loss(probe, mask, torch::tensor({true})).item<double>();
    flat[i] = orig - eps;
    const double down = structural_constraint_loss(probe, mask, torch::tensor({true})).item<double>();
    flat[i] = orig;
    EXPECT_LT(oracle::rel_err((up - down) / (2 * eps), expected.view({-1})[i].item<double>()), 1e-3);
  }
}

TEST(PathologyAwarenessLossTest, Anchors) {
  EXPECT_NEAR(pathology_awareness_loss(torch::zeros({4}, torch::kDouble), torch::tensor({0, 1, 1, 0})).item<double>(),
              kLn2, 1e-6);
  EXPECT_LT(pathology_awareness_loss(torch::full({2}, 40.0, torch::kDouble), torch::tensor({1, 1})).item<double>(),
            1e-6);
  EXPECT_LT(pathology_awareness_loss(torch::full({2}, -40.0, torch::kDouble), torch::tensor({0, 0})).item<double>(),
            1e-6);
}

TEST(PathologyAwarenessLossTest, MatchesScalarBce) {
  torch::manual_seed(7);
  const torch::Tensor logit = 3.0 * rnd({6});
  const torch::Tensor label = torch::tensor({1, 0, 0, 1, 1, 0});
  double s = 0.0;
  for (int i = 0; i < 6; ++i) s += oracle::bce_with_logit(logit[i].item<double>(), label[i].item<int64_t>());
  EXPECT_NEAR(pathology_awareness_loss(logit, label).item<double>(), s / 6.0, 1e-7);
}

TEST(PathologyAwarenessLossTest, GradientIsSigmoidMinusLabel) {
  torch::manual_seed(8);
  const torch::Tensor logit = rnd({5}).requires_grad_(true);
  const torch::Tensor label = torch::tensor({1, 0, 1, 1, 0});
  pathology_awareness_loss(logit, label).backward();
  for (int i = 0; i < 5; ++i) {
    const double z = logit[i].item<double>(), eps = 1e-6;
    const double up = oracle::bce_with_logit(z + eps, label[i].item<int64_t>());
    const double down = oracle::bce_with_logit(z - eps, label[i].item<int64_t>());
    EXPECT_LT(oracle::rel_err((up - down) / (2 * eps) / 5.0, logit.grad()[i].item<double>()), 1e-3);
  }
}

TEST(PathologyAwarenessLossTest, RejectsNonBinaryLabels) {
  EXPECT_THROW(pathology_awareness_loss(rnd({2}), torch::tensor({0, 2})), ConfigError);
}

TEST(TotalLossTest, PaperWeightsOnUnitParts) {
  const LossRecord r = total_loss({1, 1, 1, 1, 1, 1}, LossWeights{});
  EXPECT_EQ(r.total, 13.2);
  EXPECT_EQ(total_loss({}, LossWeights{}).total, 0.0);
}

TEST(TotalLossTest, MatchesHandSum) {
  const LossParts p{0.3, 0.7, 0.11, 2.5, 0.9, 0.05};
  const LossWeights w{1.5, 0.25, 3.0, 0.5};
  EXPECT_NEAR(total_loss(p, w).total, 0.3 + 0.7 + 1.5 * 0.11 + 0.25 * 2.5 + 3.0 * 0.9 + 0.5 * 0.05, 1e-12);
}

TEST(TotalLossTest, LinearInEachComponent) {
  const LossWeights w{};
  const std::array<double, 6> coeff = {1.0, 1.0, w.alpha, w.beta, w.gamma, w.iota};
  for (int k = 0; k < 6; ++k) {
    LossParts a{0.2, 0.4, 0.6, 0.8, 1.0, 1.2};
    LossParts b = a;
    double* field = &b.adv_OH + k;
    *field += 1e-3;
    EXPECT_NEAR((total_loss(b, w).total - total_loss(a, w).total) / 1e-3, coeff[k], 1e-9);
  }
}

TEST(TotalLossTest, NonFinitePartNamesTerm) {
  LossParts p{1, 1, 1, 1, 1, 1};
  p.embedding = std::numeric_limits<double>::quiet_NaN();
  try {
    total_loss(p, LossWeights{});
    FAIL();
  } catch (const NonFiniteLoss& e) {
    EXPECT_EQ(e.term(), "embedding");
  }
  p.embedding = 1.0;
  p.pa = std::numeric_limits<double>::infinity();
  EXPECT_THROW(total_loss(p, LossWeights{}), NonFiniteLoss);
}

TEST(TotalLossTest, WeightedSumAgreesWithRecord) {
  torch::manual_seed(9);
  LossTerms t;
  t.adv_OH = torch::rand({}, torch::kDouble);
  t.adv_HO = torch::rand({}, torch::kDouble);
  t.cycle = torch::rand({}, torch::kDouble);
  t.embedding = torch::rand({}, torch::kDouble);
  t.sc = torch::rand({}, torch::kDouble);
  t.pa = torch::rand({}, torch::kDouble);
  EXPECT_NEAR(weighted_sum(t, LossWeights{}).item<double>(), total_loss(t.values(), LossWeights{}).total, 1e-12);
  t.sc = torch::Tensor();
  EXPECT_EQ(t.values().sc, 0.0);
}

TEST(LossWeightsTest, ValidationAndJson) {
  EXPECT_NO_THROW(LossWeights{}.validate());
  EXPECT_THROW((LossWeights{-1.0, 0.2, 5, 5}.validate()), ConfigError);
  EXPECT_THROW((LossWeights{1.0, std::nan(""), 5, 5}.validate()), ConfigError);
  const LossWeights w{2, 0.1, 3, 4};
  EXPECT_EQ(nlohmann::json(w).get<LossWeights>(), w);
}

}  // namespace
}  // namespace vstain::losses
