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

#ifndef VSTAIN_METRICS_BLINDTEST_HPP_
#define VSTAIN_METRICS_BLINDTEST_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "nlohmann/json.hpp"

namespace vstain::metrics {

enum class Truth { kReal, kVirtual };
std::string to_string(Truth t);
Truth truth_from_string(const std::string& s);  // "real" | "virtual"; ConfigError otherwise

struct BlindTestItem {
  std::string id;
  std::string image_path;
  Truth truth = Truth::kReal;
  bool operator==(const BlindTestItem&) const = default;
};

// Items in presentation order. Ids are unique.
struct BlindTestManifest {
  std::vector<BlindTestItem> items;
  std::uint64_t seed = 0;

  // Seeded shuffle of the given items. Throws ConfigError on duplicate ids.
  static BlindTestManifest create(std::vector<BlindTestItem> items, std::uint64_t seed);

  nlohmann::json to_json() const;  // answer key, truth included
  static BlindTestManifest from_json(const nlohmann::json& j);
};

// Rater-facing CSV "id,image_path" in presentation order; no truth column.
void export_rater_sheet(const BlindTestManifest& manifest, const std::filesystem::path& csv);
std::vector<std::pair<std::string, std::string>> read_rater_sheet(const std::filesystem::path& csv);

// Responses CSV "id,response" with response in {real, virtual}.
std::map<std::string, Truth> read_responses(const std::filesystem::path& csv);
void write_responses(const std::map<std::string, Truth>& responses, const std::filesystem::path& csv);

struct Confusion {
  // [truth][response], index 0 real, 1 virtual.
  std::int64_t counts[2][2] = {{0, 0}, {0, 0}};
  std::int64_t total() const;
  std::int64_t deemed_real() const { return counts[0][0] + counts[1][0]; }
  std::int64_t deemed_virtual() const { return counts[0][1] + counts[1][1]; }
  double accuracy() const;
  nlohmann::json to_json() const;
  bool operator==(const Confusion& o) const;
};

// Throws ConfigError when an item has no response or a response names an
// unknown id.
Confusion blind_test(const BlindTestManifest& manifest, const std::map<std::string, Truth>& responses);

}  // namespace vstain::metrics

#endif  // VSTAIN_METRICS_BLINDTEST_HPP_
