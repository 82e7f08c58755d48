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

#ifndef VSTAIN_TRAIN_TRAINER_HPP_
#define VSTAIN_TRAIN_TRAINER_HPP_

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nlohmann/json.hpp"
#include "vstain/data/dataset.hpp"
#include "vstain/losses/losses.hpp"
#include "vstain/nets/discriminator.hpp"
#include "vstain/nets/generator.hpp"

namespace vstain::train {

// full: both guidance heads; no_pa: SCT-GAN; no_sc: PAT-GAN; neither: T-GAN.
enum class Ablation { kFull, kNoPa, kNoSc, kNeither };

std::string to_string(Ablation a);
Ablation ablation_from_string(const std::string& name);
inline bool sc_enabled(Ablation a) { return a == Ablation::kFull || a == Ablation::kNoPa; }
inline bool pa_enabled(Ablation a) { return a == Ablation::kFull || a == Ablation::kNoSc; }

struct TrainConfig {
  int batch_size = 9;
  double lr0 = 1e-4;
  int decay_every = 2;  // epochs per learning-rate plateau
  int epochs = 10;
  losses::LossWeights weights;
  Ablation ablation = Ablation::kFull;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;  // steps; 0 keeps only the final checkpoint
  std::int64_t max_steps = 0;  // 0: run all epochs
  int micro_batch = 1;  // images per forward/backward; gradients are accumulated
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int patch_size = data::kPatchSize;
  std::string train_split = "train";
  nets::GeneratorConfig generator;  // OCT -> H&E; the reverse swaps in/out channels
  int discriminator_channels = 32;

  // Throws ConfigError.
  void validate() const;

  nets::GeneratorConfig generator_oh() const;
  nets::GeneratorConfig generator_ho() const;
  nets::DiscriminatorConfig discriminator_h() const;
  nets::DiscriminatorConfig discriminator_o() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// lr0 * (1 - floor(epoch / decay_every) / ceil(epochs / decay_every)), >= 0.
double lr_schedule(int epoch, const TrainConfig& config);

// Patch pools for both domains. Layer masks travel with both; labels are the
// patch-level pathology labels.
struct TrainingData {
  torch::Tensor oct;         // [N, 1, P, P] float
  torch::Tensor he;          // [M, 3, P, P] float
  torch::Tensor oct_layers;  // [N, P, P] int64
  torch::Tensor he_layers;   // [M, P, P] int64
  torch::Tensor oct_labels;  // [N] int64
  torch::Tensor he_labels;   // [M] int64

  int64_t oct_count() const { return oct.defined() ? oct.size(0) : 0; }
  int64_t he_count() const { return he.defined() ? he.size(0) : 0; }
};

// Loads every sample of the split and tiles it. Throws ConfigError when the
// split is empty.
TrainingData load_training_data(const data::DatasetManifest& manifest, const std::string& split,
                                int patch_size);

struct Batch {
  torch::Tensor oct, he;
  torch::Tensor oct_layers, he_layers;
  torch::Tensor oct_labels, he_labels;

  int64_t size() const { return oct.size(0); }
  Batch slice(int64_t begin, int64_t end) const;
};

// Deterministic batch order: per epoch, an independent seeded permutation of
// each pool and a hash-derived horizontal flip per (epoch, domain, patch).
// Steps per epoch = ceil(max(N, M) / batch_size); the shorter pool wraps.
class BatchSchedule {
 public:
  BatchSchedule(int64_t oct_count, int64_t he_count, int batch_size, std::uint64_t seed);

  int64_t steps_per_epoch() const { return steps_per_epoch_; }
  int epoch_of(int64_t step) const { return static_cast<int>(step / steps_per_epoch_); }

  struct Selection {
    std::vector<int64_t> oct, he;
    std::vector<bool> oct_flip, he_flip;
  };
  // step is 0-based.
  Selection select(int64_t step) const;
  Batch batch(const TrainingData& data, int64_t step) const;

 private:
  int64_t oct_count_, he_count_, pool_, steps_per_epoch_;
  int batch_size_;
  std::uint64_t seed_;
};

struct Models {
  nets::Generator g_oh{nullptr}, g_ho{nullptr};
  nets::Discriminator d_h{nullptr}, d_o{nullptr};
};

// Seeds torch's generator with config.seed, then builds the four networks.
Models make_models(const TrainConfig& config);

struct DiscriminatorLosses {
  double d_h = 0.0;
  double d_o = 0.0;
};

struct StepResult {
  losses::LossRecord record;  // generator side
  DiscriminatorLosses discriminators;
};

// Raised when a loss term goes non-finite; carries the 1-based step.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(std::int64_t step, std::string term, double value);
  std::int64_t step() const { return step_; }
  const std::string& term() const { return term_; }

 private:
  std::int64_t step_;
  std::string term_;
};

class Trainer {
 public:
  Trainer(TrainConfig config, Models models);

  // Discriminators on real vs current fakes, generators held fixed.
  DiscriminatorLosses discriminator_step(const Batch& batch);
  // Generators on the full objective, discriminators held fixed. Throws
  // NonFiniteLoss naming the term.
  losses::LossRecord generator_step(const Batch& batch);
  // Both updates with the learning rate of step's epoch (step 0-based).
  StepResult train_step(const Batch& batch, std::int64_t step, const BatchSchedule& schedule);

  void set_learning_rate(double lr);
  double learning_rate() const { return lr_; }

  // Four networks (with SCPA inside the generators), optimizer state and
  // trainer_state.json {step, config}.
  void save(const std::filesystem::path& dir, std::int64_t step) const;
  // Returns the step stored in the checkpoint. Throws ConfigError on
  // architecture or training-setup mismatch.
  std::int64_t load(const std::filesystem::path& dir);

  Models& models() { return models_; }
  const TrainConfig& config() const { return config_; }

 private:
  TrainConfig config_;
  Models models_;
  std::unique_ptr<torch::optim::Adam> opt_g_, opt_d_;
  double lr_;
};

inline constexpr const char* kLossCsv = "loss.csv";
inline constexpr const char* kCheckpointDir = "checkpoints";
inline constexpr const char* kFinalCheckpoint = "final";
std::string step_checkpoint_name(std::int64_t step);  // "step_000123"

struct RunResult {
  std::int64_t steps = 0;  // total steps completed, including resumed ones
  std::filesystem::path final_checkpoint;
  std::vector<losses::LossRecord> records;  // this invocation only
};

// Called after every step with (1-based step, total steps, result).
using StepCallback = std::function<void(std::int64_t, std::int64_t, const StepResult&)>;

// Trains from scratch, or from `resume` (a checkpoint directory). Writes
// out_dir/loss.csv, out_dir/checkpoints/step_XXXXXX and .../final, and the
// resolved config. Throws TrainingAborted on a non-finite loss.

RunResult run_training(const TrainConfig& config, const data::DatasetManifest& manifest,
                       const std::filesystem::path& out_dir,
                       const std::optional<std::filesystem::path>& resume = std::nullopt,
                       const StepCallback& on_step = {});

// Reads out_dir/loss.csv rows as records plus lr.
struct CsvRow {
  std::int64_t step = 0;
  losses::LossRecord record;
  double lr = 0.0;
};
std::vector<CsvRow> read_loss_csv(const std::filesystem::path& file);

}  // namespace vstain::train

#endif  // VSTAIN_TRAIN_TRAINER_HPP_
