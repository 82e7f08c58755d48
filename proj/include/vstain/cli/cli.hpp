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

#ifndef VSTAIN_CLI_CLI_HPP_
#define VSTAIN_CLI_CLI_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nlohmann/json.hpp"
#include "vstain/data/dataset.hpp"
#include "vstain/metrics/evaluate.hpp"
#include "vstain/train/trainer.hpp"

namespace vstain::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitTrainingAborted = 3;

// Commands: phantom-gen, train, stain, evaluate, blindtest export|score,
// ablate. args excludes the program name. Logs go to `log`.
int run(const std::vector<std::string>& args, std::ostream& log);
int run(int argc, const char* const* argv);

inline constexpr const char* kSeedVariable = "SCPAT_SEED";
// Parsed SCPAT_SEED, if set. Throws ConfigError when it is not an unsigned
// integer.
std::optional<std::uint64_t> seed_override();

// Writes <out_dir>/<command>.resolved.json.
void write_resolved(const std::filesystem::path& out_dir, const std::string& command, const nlohmann::json& doc);

struct StainedImage {
  std::filesystem::path input;
  std::filesystem::path image;         // <stem>_he.png
  std::filesystem::path segmentation;  // <stem>_seg.png, labels {0, 1, 2}
  std::filesystem::path sidecar;       // <stem>.json
  double pathology_probability = 0.0;
};

// Translates one OCT PNG or every PNG in a directory (sorted by name) with
// <checkpoint>/G_OH. Inputs are replicate-padded on the bottom and right to a
// multiple of 8 and cropped back. Non-PNG files are skipped with a warning;
// RGB inputs are reduced to their channel mean.
std::vector<StainedImage> stain(const std::filesystem::path& checkpoint, const std::filesystem::path& input,
                                const std::filesystem::path& out_dir, std::ostream& log);

struct AblationRow {
  train::Ablation ablation;
  std::string variant;  // SCPAT-GAN, SCT-GAN, PAT-GAN, T-GAN
  metrics::Report report;
  double final_cycle = 0.0;
};

// Trains and evaluates the four variants sequentially with the base config's
// seed and data, under out_dir/<ablation>. Writes out_dir/ablation.csv and
// out_dir/ablation.md (variants x FID, PHV1, PHV2, PHV3).
std::vector<AblationRow> ablate(const train::TrainConfig& base, const data::DatasetManifest& manifest,
                                const std::filesystem::path& out_dir, const std::string& eval_split,
                                std::ostream& log);

std::string variant_name(train::Ablation a);

}  // namespace vstain::cli

#endif  // VSTAIN_CLI_CLI_HPP_
