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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "vstain/common.hpp"
#include "vstain/data/dataset.hpp"
#include "vstain/nets/init.hpp"
#include "vstain/nets/scpa.hpp"
#include "vstain/train/trainer.hpp"

namespace vstain::train {
namespace {
namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("vstain_train_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// One normal and one pathological 736 phantom: 9 + 9 tiles of side 224.
const data::DatasetManifest& phantoms() {
  static const data::DatasetManifest m = [] {
    const auto items = data::standard_items(1, 1, 500, "train", 736);
    return data::build_dataset(items, scratch("data"));
  }();
  return m;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.patch_size = 224;
  c.epochs = 4;
  c.decay_every = 2;
  c.micro_batch = 3;
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

std::string checksum(torch::nn::Module& m, bool (*filter)(const std::string&) = nullptr) {
  if (!filter) return nets::parameter_checksum(m);
  return nets::parameter_checksum(m, filter);
}

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12}); }

void expect_csv_close(const std::vector<CsvRow>& a, const std::vector<CsvRow>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].step, b[i].step);
    const auto va = a[i].record.values(), vb = b[i].record.values();
    for (size_t k = 0; k < va.size(); ++k) EXPECT_LE(rel(va[k], vb[k]), 1e-5) << "row " << i << " col " << k;
    EXPECT_LE(rel(a[i].record.total, b[i].record.total), 1e-5);
    EXPECT_LE(rel(a[i].lr, b[i].lr), 1e-5);
  }
}

// --- schedule and config -----------------------------------------------------

TEST(LrScheduleTest, LinearDecayPlateaus) {
  TrainConfig c;
  EXPECT_DOUBLE_EQ(lr_schedule(0, c), 1e-4);
  EXPECT_DOUBLE_EQ(lr_schedule(1, c), 1e-4);
  EXPECT_NEAR(lr_schedule(2, c), 8e-5, 1e-18);
  EXPECT_NEAR(lr_schedule(4, c), 6e-5, 1e-18);
  EXPECT_NEAR(lr_schedule(9, c), 2e-5, 1e-18);
  EXPECT_DOUBLE_EQ(lr_schedule(c.epochs, c), 0.0);
  EXPECT_DOUBLE_EQ(lr_schedule(3 * c.epochs, c), 0.0);
  for (int e = 1; e < 3 * c.epochs; ++e) EXPECT_LE(lr_schedule(e, c), lr_schedule(e - 1, c));
}

TEST(LrScheduleTest, OddEpochCountNeverNegative) {
  TrainConfig c;
  c.epochs = 7;
  c.decay_every = 3;
  for (int e = 0; e < 20; ++e) EXPECT_GE(lr_schedule(e, c), 0.0);
  EXPECT_NEAR(lr_schedule(3, c), 1e-4 * (1.0 - 1.0 / 3.0), 1e-18);
}

TEST(TrainConfigTest, JsonRoundTripAndUnknownKeys) {
  TrainConfig c = tiny_config();
  c.ablation = Ablation::kNoSc;
  c.seed = 42;
  const nlohmann::json j = c;
  const TrainConfig back = j.get<TrainConfig>();
  EXPECT_EQ(nlohmann::json(back), j);
  nlohmann::json bad = j;
  bad["learning_rate"] = 1.0;
  EXPECT_THROW(bad.get<TrainConfig>(), ConfigError);
  EXPECT_THROW(nlohmann::json({{"ablation", "some"}}).get<TrainConfig>(), ConfigError);
}

TEST(TrainConfigTest, ValidationRejectsBadFields) {
  TrainConfig c;
  c.patch_size = 100;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig();
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig();
  c.weights.gamma = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(AblationTest, NamesAndSwitches) {
  for (Ablation a : {Ablation::kFull, Ablation::kNoPa, Ablation::kNoSc, Ablation::kNeither}) {
    EXPECT_EQ(ablation_from_string(to_string(a)), a);
  }
  EXPECT_TRUE(sc_enabled(Ablation::kNoPa));
  EXPECT_FALSE(pa_enabled(Ablation::kNoPa));
  EXPECT_FALSE(sc_enabled(Ablation::kNoSc));
  EXPECT_TRUE(pa_enabled(Ablation::kNoSc));
  EXPECT_FALSE(sc_enabled(Ablation::kNeither) || pa_enabled(Ablation::kNeither));
  EXPECT_THROW(ablation_from_string("all"), ConfigError);
}

// --- batching ------------------------------------------------------------------

TEST(BatchScheduleTest, EveryPatchOncePerEpochAndShortPoolWraps) {
  const BatchSchedule s(7, 3, 3, 9);
  EXPECT_EQ(s.steps_per_epoch(), 3);
  for (int epoch = 0; epoch < 3; ++epoch) {
    std::multiset<int64_t> oct, he;
    for (int64_t k = 0; k < 3; ++k) {
      const auto sel = s.select(epoch * 3 + k);
      oct.insert(sel.oct.begin(), sel.oct.end());
      he.insert(sel.he.begin(), sel.he.end());
    }
    EXPECT_EQ(oct, (std::multiset<int64_t>{0, 1, 2, 3, 4, 5, 6}));
    EXPECT_EQ(he.size(), 7u);
    for (int64_t i = 0; i < 3; ++i) EXPECT_GE(he.count(i), 2u);
  }
  EXPECT_NE(s.select(0).oct, s.select(3).oct);
}

TEST(BatchScheduleTest, DeterministicAndFlipsMatchPixels) {
  const TrainingData d = load_training_data(phantoms(), "train", 224);
  ASSERT_EQ(d.oct_count(), 18);
  ASSERT_EQ(d.he_count(), 18);
  EXPECT_EQ(d.oct.sizes(), (std::vector<int64_t>{18, 1, 224, 224}));
  EXPECT_EQ(d.he_layers.scalar_type(), torch::kLong);
  EXPECT_GE(d.oct_labels.sum().item<int64_t>(), 1);
  const BatchSchedule a(18, 18, 9, 3), b(18, 18, 9, 3);
  for (int64_t step = 0; step < 4; ++step) {
    const Batch x = a.batch(d, step), y = b.batch(d, step);
    EXPECT_TRUE(torch::equal(x.oct, y.oct));
    const auto sel = a.select(step);
    for (size_t i = 0; i < sel.oct.size(); ++i) {
      const torch::Tensor src = d.oct[sel.oct[i]];
      EXPECT_TRUE(torch::equal(x.oct[i], sel.oct_flip[i] ? src.flip({-1}) : src));
      const torch::Tensor lay = d.he_layers[sel.he[i]];
      EXPECT_TRUE(torch::equal(x.he_layers[i], sel.he_flip[i] ? lay.flip({-1}) : lay));
      EXPECT_EQ(x.he_labels[i].item<int64_t>(), d.he_labels[sel.he[i]].item<int64_t>());
    }
  }
}

TEST(BatchScheduleTest, RejectsEmptyPools) {
  EXPECT_THROW(BatchSchedule(0, 3, 2, 0), ConfigError);
  TrainConfig c = tiny_config();
  c.train_split = "missing";
  EXPECT_THROW(run_training(c, phantoms(), scratch("empty")), ConfigError);
}

// --- step mechanics ---------------------------------------------------------------

struct Fixture {
  TrainConfig config = tiny_config();
  TrainingData data = load_training_data(phantoms(), "train", 224);
  BatchSchedule schedule{data.oct_count(), data.he_count(), config.batch_size, config.seed};
};

TEST(TrainerTest, EachUpdateTouchesOnlyItsOwnNetworks) {
  Fixture f;
  Trainer t(f.config, make_models(f.config));
  auto& m = t.models();
  const Batch batch = f.schedule.batch(f.data, 0);
  const std::string g0 = checksum(*m.g_oh) + checksum(*m.g_ho);
  const std::string d0 = checksum(*m.d_h) + checksum(*m.d_o);
  t.discriminator_step(batch);
  EXPECT_EQ(checksum(*m.g_oh) + checksum(*m.g_ho), g0);
  const std::string d1 = checksum(*m.d_h) + checksum(*m.d_o);
  EXPECT_NE(d1, d0);
  t.generator_step(batch);
  EXPECT_EQ(checksum(*m.d_h) + checksum(*m.d_o), d1);
  EXPECT_NE(checksum(*m.g_oh) + checksum(*m.g_ho), g0);
  for (auto& p : m.d_h->parameters()) EXPECT_TRUE(p.requires_grad());
}

TEST(TrainerTest, RecordTotalIsWeightedSumOfParts) {
  Fixture f;
  f.config.weights = {0.7, 0.3, 2.0, 3.0};
  Trainer t(f.config, make_models(f.config));
  const losses::LossRecord r = t.generator_step(f.schedule.batch(f.data, 0));
  const double expect = r.adv_OH + r.adv_HO + 0.7 * r.cycle + 0.3 * r.embedding + 2.0 * r.sc + 3.0 * r.pa;
  EXPECT_NEAR(r.total, expect, 1e-9 * std::abs(expect));
  for (double v : r.values()) EXPECT_TRUE(std::isfinite(v));
  EXPECT_GT(r.sc, 0.0);
  EXPECT_GT(r.pa, 0.0);
}

TEST(TrainerTest, MicroBatchingMatchesWholeBatch) {
  Fixture f;
  f.config.batch_size = 4;
  const Batch batch = f.schedule.batch(f.data, 0).slice(0, 4);
  TrainConfig whole = f.config, parts = f.config;
  whole.micro_batch = 4;
  parts.micro_batch = 1;
  Trainer a(whole, make_models(whole)), b(parts, make_models(parts));
  const auto ra = a.generator_step(batch), rb = b.generator_step(batch);
  for (size_t k = 0; k < ra.values().size(); ++k) EXPECT_LE(rel(ra.values()[k], rb.values()[k]), 1e-5) << k;
  const auto da = a.discriminator_step(batch), db = b.discriminator_step(batch);
  EXPECT_LE(rel(da.d_h, db.d_h), 1e-5);
  EXPECT_LE(rel(da.d_o, db.d_o), 1e-5);
}

TEST(TrainerTest, DiscriminatorLossFallsAgainstFrozenGenerator) {
  Fixture f;
  f.config.lr0 = 1e-3;
  Trainer t(f.config, make_models(f.config));
  std::vector<double> loss;
  for (int k = 0; k < 50; ++k) {
    const auto d = t.discriminator_step(f.schedule.batch(f.data, k % 2));
    loss.push_back(d.d_h + d.d_o);
  }
  std::vector<double> avg;
  for (size_t i = 10; i <= loss.size(); ++i) {
    double s = 0.0;
    for (size_t k = i - 10; k < i; ++k) s += loss[k];
    avg.push_back(s / 10.0);
  }
  for (size_t i = 1; i < avg.size(); ++i) EXPECT_LT(avg[i], avg[i - 1]) << "window " << i;
}

TEST(TrainerTest, NonFiniteLossAbortsNamingStepAndTerm) {
  Fixture f;
  Trainer t(f.config, make_models(f.config));
  Batch batch = f.schedule.batch(f.data, 0);
  batch.he = batch.he.clone();
  batch.he[0][0][0][0] = std::nan("");
  try {
    t.train_step(batch, 4, f.schedule);
    FAIL() << "expected abort";
  } catch (const TrainingAborted& e) {
    EXPECT_EQ(e.step(), 5);
    EXPECT_EQ(e.term(), "D_H");  // the real H&E batch reaches D_H first
  }
  try {
    t.generator_step(batch);
    FAIL() << "expected NonFiniteLoss";
  } catch (const NonFiniteLoss& e) {
    EXPECT_EQ(e.term(), "adv_HO");
  }
}

// --- ablations ------------------------------------------------------------------

bool seg(const std::string& n) { return nets::is_segmentation_head_param(n); }
bool cls(const std::string& n) { return nets::is_classifier_param(n); }

void check_ablation(Ablation a, bool (*disabled)(const std::string&), bool (*enabled)(const std::string&)) {
  Fixture f;
  f.config.ablation = a;
  Trainer t(f.config, make_models(f.config));
  auto& m = t.models();
  const std::string off0 = checksum(*m.g_oh, disabled) + checksum(*m.g_ho, disabled);
  const std::string on0 = checksum(*m.g_oh, enabled) + checksum(*m.g_ho, enabled);
  for (int step = 0; step < 3; ++step) {
    const StepResult r = t.train_step(f.schedule.batch(f.data, step), step, f.schedule);
    if (a == Ablation::kNoSc) {
      EXPECT_EQ(r.record.sc, 0.0);
      EXPECT_GT(r.record.pa, 0.0);
    } else {
      EXPECT_EQ(r.record.pa, 0.0);
      EXPECT_GT(r.record.sc, 0.0);
    }
  }
  EXPECT_EQ(checksum(*m.g_oh, disabled) + checksum(*m.g_ho, disabled), off0);
  EXPECT_NE(checksum(*m.g_oh, enabled) + checksum(*m.g_ho, enabled), on0);
}

TEST(AblationTrainingTest, NoScLeavesSegmentationHeadUntouched) { check_ablation(Ablation::kNoSc, seg, cls); }
TEST(AblationTrainingTest, NoPaLeavesClassifierUntouched) { check_ablation(Ablation::kNoPa, cls, seg); }

TEST(AblationTrainingTest, NeitherRecordsBothTermsAsZero) {
  Fixture f;
  f.config.ablation = Ablation::kNeither;
  Trainer t(f.config, make_models(f.config));
  const auto r = t.train_step(f.schedule.batch(f.data, 0), 0, f.schedule).record;
  EXPECT_EQ(r.sc, 0.0);
  EXPECT_EQ(r.pa, 0.0);
  EXPECT_NEAR(r.total, r.adv_OH + r.adv_HO + r.cycle + 0.2 * r.embedding, 1e-9 * r.total);
}

// --- runs, determinism, resume ------------------------------------------------------

TEST(RunTrainingTest, StepCountCsvAndCheckpoints) {
  TrainConfig c = tiny_config();
  c.epochs = 1;
  c.checkpoint_every = 1;
  const fs::path out = scratch("run");
  std::vector<int64_t> seen;
  const RunResult r = run_training(c, phantoms(), out, std::nullopt,
                                   [&](int64_t step, int64_t total, const StepResult&) {
                                     seen.push_back(step);
                                     EXPECT_EQ(total, 2);
                                   });
  EXPECT_EQ(r.steps, 2);
  EXPECT_EQ(seen, (std::vector<int64_t>{1, 2}));
  const auto rows = read_loss_csv(out / kLossCsv);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].step, 2);
  EXPECT_DOUBLE_EQ(rows[0].lr, 1e-4);
  for (const auto& row : rows) {
    const auto again = losses::total_loss(row.record, c.weights);
    EXPECT_LE(rel(again.total, row.record.total), 1e-8);
  }
  for (const char* stem : {"G_OH", "G_HO", "D_H", "D_O"}) {
    EXPECT_TRUE(fs::exists(out / kCheckpointDir / kFinalCheckpoint / (std::string(stem) + ".pt")));
    EXPECT_TRUE(fs::exists(out / kCheckpointDir / "step_000001" / (std::string(stem) + ".json")));
  }
  EXPECT_TRUE(fs::exists(out / "config.resolved.json"));
}

TEST(RunTrainingTest, LearningRateFollowsEpochSchedule) {
  TrainConfig c = tiny_config();
  c.epochs = 3;
  c.decay_every = 1;
  c.max_steps = 5;
  const fs::path out = scratch("lr");
  run_training(c, phantoms(), out);
  const auto rows = read_loss_csv(out / kLossCsv);
  ASSERT_EQ(rows.size(), 5u);
  const double expect[] = {1e-4, 1e-4, 1e-4 * 2 / 3, 1e-4 * 2 / 3, 1e-4 / 3};
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(rows[i].lr, expect[i], 1e-12);
}

TEST(RunTrainingTest, SameSeedSameCsv) {
  TrainConfig c = tiny_config();
  c.max_steps = 3;
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  run_training(c, phantoms(), a);
  run_training(c, phantoms(), b);
  expect_csv_close(read_loss_csv(a / kLossCsv), read_loss_csv(b / kLossCsv));
  c.seed = 1;
  const fs::path other = scratch("det_c");
  run_training(c, phantoms(), other);
  EXPECT_NE(read_loss_csv(a / kLossCsv)[0].record.total, read_loss_csv(other / kLossCsv)[0].record.total);
}

TEST(RunTrainingTest, ResumeMatchesUninterruptedRun) {
  TrainConfig c = tiny_config();
  c.max_steps = 4;
  c.checkpoint_every = 2;
  const fs::path full = scratch("resume_full"), split = scratch("resume_split");
  run_training(c, phantoms(), full);
  TrainConfig first = c;
  first.max_steps = 2;
  run_training(first, phantoms(), split);
  const RunResult r = run_training(c, phantoms(), split, split / kCheckpointDir / kFinalCheckpoint);
  EXPECT_EQ(r.steps, 4);
  EXPECT_EQ(r.records.size(), 2u);
  expect_csv_close(read_loss_csv(full / kLossCsv), read_loss_csv(split / kLossCsv));
  // The intermediate checkpoint of the uninterrupted run resumes to the same place.
  const fs::path mid = scratch("resume_mid");
  run_training(c, phantoms(), mid, full / kCheckpointDir / step_checkpoint_name(2));
  const auto tail = read_loss_csv(mid / kLossCsv), ref = read_loss_csv(full / kLossCsv);
  expect_csv_close(tail, std::vector<CsvRow>(ref.begin() + 2, ref.end()));
}

TEST(RunTrainingTest, ResumeRejectsDifferentSetup) {
  TrainConfig c = tiny_config();
  c.max_steps = 1;
  const fs::path out = scratch("mismatch");
  run_training(c, phantoms(), out);
  const fs::path ckpt = out / kCheckpointDir / kFinalCheckpoint;
  TrainConfig arch = c;
  arch.generator.scpa_embed = 16;
  EXPECT_THROW(run_training(arch, phantoms(), scratch("mismatch_arch"), ckpt), ConfigError);
  TrainConfig seed = c;
  seed.seed = 5;
  EXPECT_THROW(run_training(seed, phantoms(), scratch("mismatch_seed"), ckpt), ConfigError);
  EXPECT_THROW(run_training(c, phantoms(), scratch("mismatch_missing"), out / "nowhere"), ConfigError);
}

}  // namespace
}  // namespace vstain::train
