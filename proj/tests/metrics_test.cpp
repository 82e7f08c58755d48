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

#include <gtest/gtest.h>
#include <torch/torch.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "vstain/common.hpp"
#include "vstain/data/dataset.hpp"
#include "vstain/metrics/blindtest.hpp"
#include "vstain/metrics/evaluate.hpp"
#include "vstain/metrics/extractor.hpp"
#include "vstain/metrics/guidance.hpp"
#include "vstain/metrics/similarity.hpp"
#include "vstain/nets/init.hpp"
#include "vstain/train/trainer.hpp"

namespace vstain::metrics {
namespace {
namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("vstain_metrics_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Eigen::MatrixXd random_set(int n, int d, unsigned seed, double shift = 0.0, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = shift + scale * normal(rng) + 0.3 * (j > 0 ? m(i, j - 1) : 0.0);
  return m;
}

// --- fid --------------------------------------------------------------------------

TEST(FidTest, IdenticalSetsGiveZero) {
  for (int d : {1, 3, 8, 112}) {
    const Eigen::MatrixXd a = random_set(40, d, 3 + d);
    EXPECT_NEAR(fid(a, a), 0.0, 1e-6) << d;
  }
}

TEST(FidTest, UnivariateClosedForm) {
  // Sample means 0 and 3, unbiased sample variances 1 and 1.
  Eigen::MatrixXd a(3, 1), b(3, 1);
  a << -1.0, 0.0, 1.0;
  b << 2.0, 3.0, 4.0;
  EXPECT_NEAR(fid(a, b), 9.0, 1e-6);
  // (mu1 - mu2)^2 + (sigma1 - sigma2)^2 in general.
  const Eigen::MatrixXd x = random_set(30, 1, 1), y = random_set(25, 1, 2, 1.5, 2.0);
  const auto stats = [](const Eigen::MatrixXd& m) {
    double mean = 0.0, var = 0.0;
    for (int i = 0; i < m.rows(); ++i) mean += m(i, 0);
    mean /= m.rows();
    for (int i = 0; i < m.rows(); ++i) var += (m(i, 0) - mean) * (m(i, 0) - mean);
    return std::pair{mean, std::sqrt(var / (m.rows() - 1))};
  };
  const auto [m1, s1] = stats(x);
  const auto [m2, s2] = stats(y);
  EXPECT_NEAR(fid(x, y), (m1 - m2) * (m1 - m2) + (s1 - s2) * (s1 - s2), 1e-6);
}

TEST(FidTest, BivariateClosedForm) {
  // For 2x2 PSD factors, tr((S_a S_b)^1/2) = sqrt(tr(S_a S_b) + 2 sqrt(det S_a det S_b)).
  for (unsigned seed = 0; seed < 10; ++seed) {
    const Eigen::MatrixXd a = random_set(20, 2, seed), b = random_set(15, 2, seed + 100, -0.5, 1.7);
    const auto moments = [](const Eigen::MatrixXd& m, double mu[2], double s[2][2]) {
      for (int j = 0; j < 2; ++j) {
        mu[j] = 0.0;
        for (int i = 0; i < m.rows(); ++i) mu[j] += m(i, j);
        mu[j] /= m.rows();
      }
      for (int p = 0; p < 2; ++p)
        for (int q = 0; q < 2; ++q) {
          s[p][q] = 0.0;
          for (int i = 0; i < m.rows(); ++i) s[p][q] += (m(i, p) - mu[p]) * (m(i, q) - mu[q]);
          s[p][q] /= m.rows() - 1;
        }
    };
    double ma[2], mb[2], sa[2][2], sb[2][2];
    moments(a, ma, sa);
    moments(b, mb, sb);
    double tr_prod = 0.0;
    for (int p = 0; p < 2; ++p)
      for (int q = 0; q < 2; ++q) tr_prod += sa[p][q] * sb[q][p];
    const double det_a = sa[0][0] * sa[1][1] - sa[0][1] * sa[1][0];
    const double det_b = sb[0][0] * sb[1][1] - sb[0][1] * sb[1][0];
    const double tr_root = std::sqrt(tr_prod + 2.0 * std::sqrt(det_a * det_b));
    const double expect = (ma[0] - mb[0]) * (ma[0] - mb[0]) + (ma[1] - mb[1]) * (ma[1] - mb[1]) + sa[0][0] +
                          sa[1][1] + sb[0][0] + sb[1][1] - 2.0 * tr_root;
    EXPECT_NEAR(fid(a, b), expect, 1e-6 * std::max(1.0, expect)) << seed;
  }
}

TEST(FidTest, SymmetricNonnegativeAndRankDeficientSafe) {
  const Eigen::MatrixXd a = random_set(10, 30, 7), b = random_set(12, 30, 8, 0.2);
  EXPECT_NEAR(fid(a, b), fid(b, a), 1e-6 * fid(a, b));
  EXPECT_GE(fid(a, b), 0.0);
  EXPECT_GT(fid(a, b), 0.0);
  const Eigen::MatrixXd constant = Eigen::MatrixXd::Ones(5, 4);
  EXPECT_NEAR(fid(constant, constant), 0.0, 1e-12);
}

TEST(FidTest, RejectsBadInput) {
  EXPECT_THROW(fid(random_set(5, 3, 1), random_set(5, 4, 2)), ConfigError);
  EXPECT_THROW(fid(random_set(1, 3, 1), random_set(5, 3, 2)), ConfigError);
}

// --- extractor and phv ------------------------------------------------------------------

TEST(ExtractorTest, CommittedArtifactMatchesSeedAndPin) {
  FeatureExtractor committed = load_extractor();
  EXPECT_EQ(nets::parameter_checksum(*committed), kExtractorChecksum);
  EXPECT_EQ(nets::parameter_checksum(*make_extractor()), kExtractorChecksum);
  for (const auto& p : committed->parameters()) EXPECT_FALSE(p.requires_grad());
}

TEST(ExtractorTest, RejectsAlteredArtifact) {
  const fs::path dir = scratch("extractor");
  save_extractor(*make_extractor(kExtractorSeed + 1), dir / "feature_extractor");
  EXPECT_THROW(load_extractor(dir / "feature_extractor"), ConfigError);
  EXPECT_THROW(load_extractor(dir / "absent"), ConfigError);
}

TEST(ExtractorTest, LevelShapesAndGrayReplication) {
  FeatureExtractor e = make_extractor();
  torch::manual_seed(0);
  const torch::Tensor gray = torch::rand({2, 1, 368, 368});
  const auto levels = e->forward(gray);
  EXPECT_EQ(levels[0].sizes(), (std::vector<int64_t>{2, 16, 184, 184}));
  EXPECT_EQ(levels[1].sizes(), (std::vector<int64_t>{2, 32, 92, 92}));
  EXPECT_EQ(levels[2].sizes(), (std::vector<int64_t>{2, 64, 46, 46}));
  const auto rgb = e->forward(gray.repeat({1, 3, 1, 1}));
  for (int i = 0; i < 3; ++i) EXPECT_TRUE(torch::equal(levels[i], rgb[i]));
  const torch::Tensor f = e->pooled_features(gray);
  EXPECT_EQ(f.sizes(), (std::vector<int64_t>{2, FeatureExtractorImpl::kFeatureDim}));
  EXPECT_THROW(e->forward(torch::rand({1, 2, 16, 16})), ConfigError);
}

// Bit-loop oracle: per channel, sort, take element (n - 1) / 2, compare.
double phv_oracle(const torch::Tensor& a, const torch::Tensor& b) {
  const auto bits = [](const torch::Tensor& m) {
    const torch::Tensor c = m.to(torch::kDouble).contiguous();
    std::vector<std::vector<bool>> out(c.size(0));
    const int64_t n = c.size(1) * c.size(2);
    for (int64_t ch = 0; ch < c.size(0); ++ch) {
      const double* p = c[ch].data_ptr<double>();
      std::vector<double> sorted(p, p + n);
      std::sort(sorted.begin(), sorted.end());
      const double med = sorted[(n - 1) / 2];
      for (int64_t i = 0; i < n; ++i) out[ch].push_back(p[i] > med);
    }
    return out;
  };
  const auto ba = bits(a), bb = bits(b);
  int64_t same = 0, total = 0;
  for (size_t ch = 0; ch < ba.size(); ++ch)
    for (size_t i = 0; i < ba[ch].size(); ++i) {
      same += ba[ch][i] == bb[ch][i];
      ++total;
    }
  return 100.0 * (static_cast<double>(same) / static_cast<double>(total));
}

TEST(PhvTest, MatchesBitLoopOracleExactly) {
  torch::manual_seed(4);
  for (int trial = 0; trial < 20; ++trial) {
    const int c = 1 + trial % 4, h = 3 + trial % 5, w = 2 + trial % 7;
    torch::Tensor a = torch::randn({c, h, w});
    torch::Tensor b = trial % 3 == 0 ? a + 0.3 * torch::randn({c, h, w}) : torch::randn({c, h, w});
    if (trial % 4 == 1) a = torch::round(a);  // ties at the median
    EXPECT_EQ(phv_bits(a, b), phv_oracle(a, b)) << trial;
  }
  FeatureExtractor e = make_extractor();
  const torch::Tensor x = torch::rand({3, 64, 64}), y = torch::rand({3, 64, 64});
  for (int level = 1; level <= 3; ++level) {
    const auto fx = e->forward(x.unsqueeze(0)), fy = e->forward(y.unsqueeze(0));
    EXPECT_EQ(phv(*e, x, y, level), phv_oracle(fx[level - 1][0], fy[level - 1][0]));
  }
}

TEST(PhvTest, IdentitySymmetryRangeAndErrors) {
  FeatureExtractor e = make_extractor();
  torch::manual_seed(5);
  for (int trial = 0; trial < 5; ++trial) {
    const torch::Tensor x = torch::rand({3, 48, 48}), y = torch::rand({3, 48, 48});
    for (int level = 1; level <= 3; ++level) {
      EXPECT_EQ(phv(*e, x, x, level), 100.0);
      const double xy = phv(*e, x, y, level);
      EXPECT_EQ(xy, phv(*e, y, x, level));
      EXPECT_GE(xy, 0.0);
      EXPECT_LE(xy, 100.0);
    }
  }
  const torch::Tensor x = torch::rand({3, 16, 16});
  EXPECT_THROW(phv(*e, x, x, 0), ConfigError);
  EXPECT_THROW(phv(*e, x, x, 4), ConfigError);
  EXPECT_THROW(phv(*e, x, torch::rand({3, 16, 32}), 1), ConfigError);
}

// --- pools and evaluate_model ---------------------------------------------------------------

TEST(ComparePoolsTest, SelfComparisonAndSchema) {
  FeatureExtractor e = load_extractor();
  torch::manual_seed(6);
  const torch::Tensor pool = torch::rand({5, 3, 64, 64});
  const Report r = compare_pools(*e, pool, pool);
  EXPECT_NEAR(r.fid, 0.0, 1e-6);
  EXPECT_EQ(r.phv1, 100.0);
  EXPECT_EQ(r.phv2, 100.0);
  EXPECT_EQ(r.phv3, 100.0);
  EXPECT_EQ(r.n_images, 5);
  std::set<std::string> keys;
  const nlohmann::json j = r.to_json();
  for (const auto& item : j.items()) keys.insert(item.key());
  EXPECT_EQ(keys, (std::set<std::string>{"fid", "phv1", "phv2", "phv3", "n_images"}));
  const Report other = compare_pools(*e, pool, torch::rand({5, 3, 64, 64}));
  EXPECT_GT(other.fid, 0.0);
  EXPECT_LT(other.phv1, 100.0);
  EXPECT_THROW(compare_pools(*e, pool.narrow(0, 0, 1), pool.narrow(0, 0, 1)), ConfigError);
  EXPECT_THROW(compare_pools(*e, pool, pool.narrow(0, 0, 4)), ConfigError);
}

train::TrainConfig tiny_config() {
  train::TrainConfig c;
  c.patch_size = 224;
  c.discriminator_channels = 4;
  auto& g = c.generator;
  g.channels = {4, 8, 16};
  g.attention = {4, 2, 4};
  g.rstb_count = 1;
  g.stl_per_rstb = 2;
  g.mlp_ratio = 2.0;
  g.scpa_embed = 8;
  g.scpa_heads = 2;
  g.scpa_encoder_depth = 1;
  g.scpa_decoder_depth = 1;
  return c;
}

TEST(EvaluateModelTest, WritesReportAndGridsDeterministically) {
  const fs::path dir = scratch("evaluate");
  const auto items = data::standard_items(1, 1, 900, "test");
  const data::DatasetManifest manifest = data::build_dataset(items, dir / "data");
  const train::TrainConfig config = tiny_config();
  train::Trainer trainer(config, train::make_models(config));
  trainer.save(dir / "ckpt", 0);

  const Report a = evaluate_model(dir / "ckpt", manifest, dir / "eval_a");
  const Report b = evaluate_model(dir / "ckpt", manifest, dir / "eval_b");
  EXPECT_EQ(a.n_images, 18);
  EXPECT_EQ(a.to_json(), b.to_json());
  EXPECT_GT(a.fid, 0.0);
  std::ifstream in(dir / "eval_a" / "report.json");
  const nlohmann::json j = nlohmann::json::parse(in);
  EXPECT_EQ(j, a.to_json());
  // 18 patches at four per grid.
  for (int k = 0; k < 5; ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "grid_%03d.png", k);
    EXPECT_TRUE(fs::exists(dir / "eval_a" / "grids" / name)) << name;
  }
  EXPECT_FALSE(fs::exists(dir / "eval_a" / "grids" / "grid_005.png"));
  EXPECT_THROW(evaluate_model(dir / "ckpt", manifest, dir / "eval_c", {"train", 4}), ConfigError);
  EXPECT_THROW(evaluate_model(dir / "missing", manifest, dir / "eval_d"), ConfigError);
}

// --- guidance -------------------------------------------------------------------------------

TEST(RocAucTest, MatchesPairCountingOracle) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 30);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (int i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng() % 7);  // frequent ties
      y[i] = static_cast<int>(rng() % 2);
    }
    y[0] = 0;
    y[1] = 1;
    double wins = 0.0, pairs = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (y[i] == 1 && y[j] == 0) {
          pairs += 1.0;
          wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        }
    EXPECT_NEAR(roc_auc(s, y), wins / pairs, 1e-12) << trial;
  }
  const std::vector<double> s{0.1, 0.2, 0.3, 0.4};
  EXPECT_EQ(roc_auc(s, std::vector<int>{0, 0, 1, 1}), 1.0);
  EXPECT_EQ(roc_auc(s, std::vector<int>{1, 1, 0, 0}), 0.0);
  EXPECT_EQ(roc_auc(std::vector<double>(4, 1.0), std::vector<int>{1, 0, 1, 0}), 0.5);
  EXPECT_THROW(roc_auc(s, std::vector<int>{1, 1, 1, 1}), ConfigError);
  EXPECT_THROW(roc_auc(s, std::vector<int>{0, 2, 1, 1}), ConfigError);
}

TEST(GuidanceTest, AccuracyCountsNormalPixelsOnly) {
  torch::manual_seed(9);
  nets::Generator g(tiny_config().generator_oh());
  const torch::Tensor images = torch::rand({3, 1, 224, 224});
  const torch::Tensor layers = torch::randint(0, 3, {3, 224, 224});
  const torch::Tensor labels = torch::tensor({0, 1, 0}, torch::kLong);
  const GuidanceEvaluation r = evaluate_guidance(*g, images, layers, labels, 2);
  EXPECT_EQ(r.segmentation_pixels, 2 * 224 * 224);
  EXPECT_EQ(r.positives, 1);
  EXPECT_EQ(r.negatives, 2);
  torch::NoGradGuard no_grad;
  g->eval();
  const auto out = g->forward(images).scpa;
  const torch::Tensor pred = out.segmentation_logits.argmax(1);
  int64_t hit = 0;
  for (int n : {0, 2}) hit += pred[n].eq(layers[n]).sum().item<int64_t>();
  EXPECT_NEAR(r.segmentation_accuracy, static_cast<double>(hit) / (2 * 224 * 224), 1e-12);
  const auto logit = out.pathology_logit;
  const double l0 = logit[0].item<double>(), l1 = logit[1].item<double>(), l2 = logit[2].item<double>();
  EXPECT_NEAR(r.auc, ((l1 > l0) + (l1 > l2)) / 2.0, 1e-12);
}

// --- blind test ------------------------------------------------------------------------------

std::vector<BlindTestItem> sixty_items() {
  std::vector<BlindTestItem> items;
  for (int i = 0; i < 60; ++i) {
    const Truth t = i < 30 ? Truth::kReal : Truth::kVirtual;
    items.push_back({"img" + std::to_string(i), "images/" + std::to_string(i) + ".png", t});
  }
  return items;
}

TEST(BlindTestTest, AllCorrectResponses) {
  const BlindTestManifest m = BlindTestManifest::create(sixty_items(), 1);
  std::map<std::string, Truth> responses;
  for (const auto& item : m.items) responses[item.id] = item.truth;
  const Confusion c = blind_test(m, responses);
  EXPECT_EQ(c.accuracy(), 1.0);
  EXPECT_EQ(c.counts[0][1], 0);
  EXPECT_EQ(c.counts[1][0], 0);
  EXPECT_EQ(c.total(), 60);
}

TEST(BlindTestTest, ReportedOutcomeTallies) {
  // 60 images, half real; 42 deemed real; of the 18 deemed virtual, 9 are virtual.
  const BlindTestManifest m = BlindTestManifest::create(sixty_items(), 2);
  std::map<std::string, Truth> responses;
  int real_called_virtual = 0, virtual_called_virtual = 0;
  for (const auto& item : m.items) {
    Truth r = Truth::kReal;
    if (item.truth == Truth::kReal && real_called_virtual < 9) {
      r = Truth::kVirtual;
      ++real_called_virtual;
    } else if (item.truth == Truth::kVirtual && virtual_called_virtual < 9) {
      r = Truth::kVirtual;
      ++virtual_called_virtual;
    }
    responses[item.id] = r;
  }
  const Confusion c = blind_test(m, responses);
  EXPECT_EQ(c.deemed_real(), 42);
  EXPECT_EQ(c.deemed_virtual(), 18);
  EXPECT_EQ(c.counts[0][0], 21);
  EXPECT_EQ(c.counts[0][1], 9);
  EXPECT_EQ(c.counts[1][0], 21);
  EXPECT_EQ(c.counts[1][1], 9);
  EXPECT_EQ(c.accuracy(), 0.5);
}

TEST(BlindTestTest, ExportIngestRoundTripHidesTruth) {
  const fs::path dir = scratch("blind");
  const BlindTestManifest m = BlindTestManifest::create(sixty_items(), 3);
  EXPECT_EQ(BlindTestManifest::from_json(m.to_json()).items, m.items);
  export_rater_sheet(m, dir / "sheet.csv");
  const auto sheet = read_rater_sheet(dir / "sheet.csv");
  ASSERT_EQ(sheet.size(), 60u);
  for (size_t i = 0; i < sheet.size(); ++i) {
    EXPECT_EQ(sheet[i].first, m.items[i].id);
    EXPECT_EQ(sheet[i].second, m.items[i].image_path);
  }
  std::ifstream in(dir / "sheet.csv");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(text.find("real"), std::string::npos);
  EXPECT_EQ(text.find("virtual"), std::string::npos);
  std::map<std::string, Truth> responses;
  for (size_t i = 0; i < m.items.size(); ++i) responses[m.items[i].id] = i % 3 ? Truth::kReal : Truth::kVirtual;
  write_responses(responses, dir / "responses.csv");
  EXPECT_EQ(read_responses(dir / "responses.csv"), responses);
}

TEST(BlindTestTest, ShuffleIsSeededAndCountsOrderInvariant) {
  const BlindTestManifest a = BlindTestManifest::create(sixty_items(), 4), b = BlindTestManifest::create(sixty_items(), 4);
  const BlindTestManifest c = BlindTestManifest::create(sixty_items(), 5);
  EXPECT_EQ(a.items, b.items);
  EXPECT_NE(a.items, c.items);
  std::map<std::string, Truth> responses;
  for (int i = 0; i < 60; ++i) responses["img" + std::to_string(i)] = i % 4 ? Truth::kReal : Truth::kVirtual;
  EXPECT_TRUE(blind_test(a, responses) == blind_test(c, responses));
}

TEST(BlindTestTest, RandomRespondingIsNearChance) {
  const BlindTestManifest m = BlindTestManifest::create(sixty_items(), 6);
  std::mt19937_64 rng(7);
  const int trials = 2000;
  double sum = 0.0;
  int inside = 0;
  const double half_width = 1.96 * std::sqrt(0.25 / 60.0);
  for (int t = 0; t < trials; ++t) {
    std::map<std::string, Truth> responses;
    for (const auto& item : m.items) responses[item.id] = (rng() & 1) ? Truth::kReal : Truth::kVirtual;
    const double acc = blind_test(m, responses).accuracy();
    sum += acc;
    inside += std::abs(acc - 0.5) <= half_width;
  }
  EXPECT_NEAR(sum / trials, 0.5, 4.0 * std::sqrt(0.25 / 60.0 / trials));
  EXPECT_GE(static_cast<double>(inside) / trials, 0.93);
}

TEST(BlindTestTest, RejectsMissingDuplicateAndUnknown) {
  const fs::path dir = scratch("blind_errors");
  const BlindTestManifest m = BlindTestManifest::create(sixty_items(), 8);
  std::map<std::string, Truth> responses;
  for (const auto& item : m.items) responses[item.id] = Truth::kReal;
  auto missing = responses;
  missing.erase(missing.begin());
  EXPECT_THROW(blind_test(m, missing), ConfigError);
  auto extra = responses;
  extra["stranger"] = Truth::kReal;
  EXPECT_THROW(blind_test(m, extra), ConfigError);
  auto items = sixty_items();
  items[1].id = items[0].id;
  EXPECT_THROW(BlindTestManifest::create(items, 0), ConfigError);
  {
    std::ofstream out(dir / "dup.csv");
    out << "id,response\nimg1,real\nimg1,virtual\n";
  }
  EXPECT_THROW(read_responses(dir / "dup.csv"), ConfigError);
  {
    std::ofstream out(dir / "bad.csv");
    out << "id,response\nimg1,maybe\n";
  }
  EXPECT_THROW(read_responses(dir / "bad.csv"), ConfigError);
  EXPECT_THROW(truth_from_string("Real"), ConfigError);
}

}  // namespace
}  // namespace vstain::metrics
