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

#ifndef VSTAIN_DATA_DATASET_HPP_
#define VSTAIN_DATA_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nlohmann/json.hpp"
#include "vstain/data/image.hpp"
#include "vstain/data/phantom.hpp"

namespace vstain::data {

struct DatasetItem {
  PhantomSpec spec;
  std::string id;  // empty: derived from pathology kind and seed
  std::string split = "train";
};

struct ManifestEntry {
  std::string id;
  PhantomSpec spec;
  int pathology_label = 0;
  std::string split;
  // Relative to the manifest directory.
  std::string oct_path;
  std::string he_path;
  std::string layer_mask_path;
  std::string lesion_mask_path;

  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  // Directory the relative paths resolve against; not serialized.
  std::filesystem::path root;

  nlohmann::json to_json() const;
  static DatasetManifest from_json(const nlohmann::json& j, std::filesystem::path root);

  // FNV-1a of the serialized manifest.
  std::string checksum() const;

  void save(const std::filesystem::path& file) const;
  static DatasetManifest load(const std::filesystem::path& file);

  std::vector<ManifestEntry> split(const std::string& name) const;
  std::filesystem::path resolve(const std::string& relative) const { return root / relative; }
};

inline constexpr const char* kManifestFile = "manifest.json";

std::string default_sample_id(const PhantomSpec& spec);

// Renders every spec and writes PNGs plus manifest.json under out_dir.
// Throws ConfigError on an empty list or duplicate ids.
DatasetManifest build_dataset(std::span<const DatasetItem> items,
                              const std::filesystem::path& out_dir);

// Dataset description file: {"samples": [...], "groups": [...]}. A group
// expands to `count` specs with consecutive seeds starting at `seed`.
std::vector<DatasetItem> parse_dataset_spec(const nlohmann::json& doc);

// n_normal normal specs followed by n_pathological specs alternating lipid and
// calcium, seeds counting up from seed_base.
std::vector<DatasetItem> standard_items(int n_normal, int n_pathological, std::uint64_t seed_base,
                                        const std::string& split, int canvas = kDefaultCanvas);

struct LoadedSample {
  ManifestEntry entry;
  Image oct;
  Image he;
  Mask layer_mask;
  Mask lesion_mask;  // {0, 1}
};

LoadedSample load_sample(const DatasetManifest& manifest, const ManifestEntry& entry);

}  // namespace vstain::data

#endif  // VSTAIN_DATA_DATASET_HPP_
