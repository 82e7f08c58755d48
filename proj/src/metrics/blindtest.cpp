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

#include "vstain/metrics/blindtest.hpp"

#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "vstain/common.hpp"

namespace vstain::metrics {
namespace fs = std::filesystem;

std::string to_string(Truth t) { return t == Truth::kReal ? "real" : "virtual"; }

Truth truth_from_string(const std::string& s) {
  if (s == "real") return Truth::kReal;
  if (s == "virtual") return Truth::kVirtual;
  throw ConfigError("blind test label must be 'real' or 'virtual', got '" + s + "'");
}

BlindTestManifest BlindTestManifest::create(std::vector<BlindTestItem> items, std::uint64_t seed) {
  std::set<std::string> ids;
  for (const auto& item : items) {
    if (item.id.empty()) throw ConfigError("blind test item with an empty id");
    if (!ids.insert(item.id).second) throw ConfigError("duplicate blind test id '" + item.id + "'");
  }
  std::mt19937_64 rng(seed);
  for (size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[rng() % i]);
  return {std::move(items), seed};
}

nlohmann::json BlindTestManifest::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& item : items) {
    list.push_back({{"id", item.id}, {"image_path", item.image_path}, {"truth", metrics::to_string(item.truth)}});
  }
  return {{"seed", seed}, {"items", list}};
}

BlindTestManifest BlindTestManifest::from_json(const nlohmann::json& j) {
  BlindTestManifest m;
  std::set<std::string> ids;
  try {
    m.seed = j.value("seed", std::uint64_t{0});
    for (const auto& item : j.at("items")) {
      BlindTestItem b{item.at("id").get<std::string>(), item.at("image_path").get<std::string>(),
                      truth_from_string(item.at("truth").get<std::string>())};
      if (!ids.insert(b.id).second) throw ConfigError("duplicate blind test id '" + b.id + "'");
      m.items.push_back(std::move(b));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed blind test manifest: ") + e.what());
  }
  return m;
}

namespace {

void check_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") != std::string::npos) {
    throw ConfigError("blind test field '" + s + "' contains a comma, quote or newline");
  }
}

// Rows of a two-column CSV after the expected header.
std::vector<std::pair<std::string, std::string>> read_pairs(const fs::path& csv, const std::string& header) {
  std::ifstream in(csv);
  if (!in) throw ConfigError("cannot read " + csv.string());
  std::string line;
  if (!std::getline(in, line) || line != header) {
    throw ConfigError(csv.string() + ": expected header '" + header + "'");
  }
  std::vector<std::pair<std::string, std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw ConfigError(csv.string() + ": malformed row '" + line + "'");
    }
    rows.emplace_back(line.substr(0, comma), line.substr(comma + 1));
  }
  return rows;
}

void write_pairs(const fs::path& csv, const std::string& header,
                 const std::vector<std::pair<std::string, std::string>>& rows) {
  std::ofstream out(csv);
  out << header << "\n";
  for (const auto& [a, b] : rows) {
    check_field(a);
    check_field(b);
    out << a << "," << b << "\n";
  }
  if (!out) throw std::runtime_error("cannot write " + csv.string());
}

}  // namespace

void export_rater_sheet(const BlindTestManifest& manifest, const fs::path& csv) {
  std::vector<std::pair<std::string, std::string>> rows;
  for (const auto& item : manifest.items) rows.emplace_back(item.id, item.image_path);
  write_pairs(csv, "id,image_path", rows);
}

std::vector<std::pair<std::string, std::string>> read_rater_sheet(const fs::path& csv) {
  return read_pairs(csv, "id,image_path");
}

std::map<std::string, Truth> read_responses(const fs::path& csv) {
  std::map<std::string, Truth> out;
  for (const auto& [id, response] : read_pairs(csv, "id,response")) {
    if (!out.emplace(id, truth_from_string(response)).second) {
      throw ConfigError("duplicate response for blind test id '" + id + "'");
    }
  }
  return out;
}

void write_responses(const std::map<std::string, Truth>& responses, const fs::path& csv) {
  std::vector<std::pair<std::string, std::string>> rows;
  for (const auto& [id, t] : responses) rows.emplace_back(id, to_string(t));
  write_pairs(csv, "id,response", rows);
}

std::int64_t Confusion::total() const { return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1]; }

double Confusion::accuracy() const {
  const std::int64_t n = total();
  return n == 0 ? 0.0 : static_cast<double>(counts[0][0] + counts[1][1]) / static_cast<double>(n);
}

bool Confusion::operator==(const Confusion& o) const {
  for (int t = 0; t < 2; ++t)
    for (int r = 0; r < 2; ++r)
      if (counts[t][r] != o.counts[t][r]) return false;
  return true;
}

nlohmann::json Confusion::to_json() const {
  return {{"real_deemed_real", counts[0][0]},
          {"real_deemed_virtual", counts[0][1]},
          {"virtual_deemed_real", counts[1][0]},
          {"virtual_deemed_virtual", counts[1][1]},
          {"deemed_real", deemed_real()},
          {"deemed_virtual", deemed_virtual()},
          {"total", total()},
          {"accuracy", accuracy()}};
}

Confusion blind_test(const BlindTestManifest& manifest, const std::map<std::string, Truth>& responses) {
  std::set<std::string> ids;
  Confusion c;
  for (const auto& item : manifest.items) {
    ids.insert(item.id);
    const auto it = responses.find(item.id);
    if (it == responses.end()) throw ConfigError("no response for blind test item '" + item.id + "'");
    ++c.counts[static_cast<int>(item.truth)][static_cast<int>(it->second)];
  }
  for (const auto& [id, _] : responses) {
    if (!ids.contains(id)) throw ConfigError("response for unknown blind test id '" + id + "'");
  }
  return c;
}

}  // namespace vstain::metrics
