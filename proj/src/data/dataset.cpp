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

#include "vstain/data/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "vstain/common.hpp"
#include "vstain/data/png_io.hpp"

namespace vstain::data {
namespace fs = std::filesystem;

namespace {

Raster<std::uint8_t> lesion_to_png(const Mask& lesion) {
  Raster<std::uint8_t> out = lesion;
  for (auto& v : out.data) v = v != 0 ? 255 : 0;
  return out;
}

}  // namespace

nlohmann::json DatasetManifest::to_json() const {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& e : entries) {
    samples.push_back({{"id", e.id},
                       {"seed", e.spec.seed},
                       {"spec", e.spec},
                       {"pathology_label", e.pathology_label},
                       {"split", e.split},
                       {"oct", e.oct_path},
                       {"he", e.he_path},
                       {"layer_mask", e.layer_mask_path},
                       {"lesion_mask", e.lesion_mask_path}});
  }
  return {{"version", 1}, {"samples", samples}};
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j, fs::path root) {
  DatasetManifest m;
  m.root = std::move(root);
  if (!j.contains("samples") || !j.at("samples").is_array()) {
    throw ConfigError("manifest has no 'samples' array");
  }
  for (const auto& s : j.at("samples")) {
    ManifestEntry e;
    e.id = s.at("id").get<std::string>();
    e.spec = s.contains("spec") ? s.at("spec").get<PhantomSpec>() : PhantomSpec{};
    e.spec.seed = s.at("seed").get<std::uint64_t>();
    e.pathology_label = s.at("pathology_label").get<int>();
    e.split = s.value("split", std::string("train"));
    e.oct_path = s.at("oct").get<std::string>();
    e.he_path = s.at("he").get<std::string>();
    e.layer_mask_path = s.value("layer_mask", std::string());
    e.lesion_mask_path = s.value("lesion_mask", std::string());
    m.entries.push_back(std::move(e));
  }
  return m;
}

std::string DatasetManifest::checksum() const {
  Fnv1a h;
  h.update(to_json().dump());
  return h.hex();
}

void DatasetManifest::save(const fs::path& file) const {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << to_json().dump(2) << "\n";
}

DatasetManifest DatasetManifest::load(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read manifest " + file.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed manifest " + file.string() + ": " + e.what());
  }
  return from_json(j, file.parent_path());
}

std::vector<ManifestEntry> DatasetManifest::split(const std::string& name) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries) {
    if (e.split == name) out.push_back(e);
  }
  return out;
}

std::string default_sample_id(const PhantomSpec& spec) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s-%06llu", std::string(to_string(spec.pathology)).c_str(),
                static_cast<unsigned long long>(spec.seed));
  return buf;
}

DatasetManifest build_dataset(std::span<const DatasetItem> items, const fs::path& out_dir) {
  if (items.empty()) throw ConfigError("build_dataset: the spec list is empty");
  std::set<std::string> ids;
  for (const auto& item : items) {
    validate(item.spec);
    const std::string id = item.id.empty() ? default_sample_id(item.spec) : item.id;
    if (!ids.insert(id).second) throw ConfigError("duplicate sample id '" + id + "'");
  }

  fs::create_directories(out_dir / "samples");
  DatasetManifest manifest;
  manifest.root = out_dir;
  for (const auto& item : items) {
    ManifestEntry e;
    e.id = item.id.empty() ? default_sample_id(item.spec) : item.id;
    e.spec = item.spec;
    e.split = item.split;
    const PhantomSample sample = generate_phantom(item.spec);
    e.pathology_label = sample.pathology_label;
    const std::string stem = "samples/" + e.id;
    e.oct_path = stem + "_oct.png";
    e.he_path = stem + "_he.png";
    e.layer_mask_path = stem + "_layers.png";
    e.lesion_mask_path = stem + "_lesions.png";
    write_image(out_dir / e.oct_path, sample.oct_image);
    write_image(out_dir / e.he_path, sample.he_image);
    write_png(out_dir / e.layer_mask_path, sample.layer_mask);
    write_png(out_dir / e.lesion_mask_path, lesion_to_png(sample.lesion_mask));
    manifest.entries.push_back(std::move(e));
  }
  manifest.save(out_dir / kManifestFile);
  return manifest;
}

std::vector<DatasetItem> parse_dataset_spec(const nlohmann::json& doc) {
  std::vector<DatasetItem> items;
  try {
    if (doc.contains("samples")) {
      for (const auto& s : doc.at("samples")) {
        items.push_back({s.get<PhantomSpec>(), s.value("id", std::string()),
                         s.value("split", std::string("train"))});
      }
    }
    if (doc.contains("groups")) {
      for (const auto& g : doc.at("groups")) {
        const int count = g.at("count").get<int>();
        PhantomSpec base = g.get<PhantomSpec>();
        for (int i = 0; i < count; ++i) {
          PhantomSpec spec = base;
          spec.seed = base.seed + static_cast<std::uint64_t>(i);
          items.push_back({spec, "", g.value("split", std::string("train"))});
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed dataset spec: ") + e.what());
  }
  return items;
}

std::vector<DatasetItem> standard_items(int n_normal, int n_pathological, std::uint64_t seed_base,
                                        const std::string& split, int canvas) {
  std::vector<DatasetItem> items;
  std::uint64_t seed = seed_base;
  for (int i = 0; i < n_normal; ++i) {
    PhantomSpec spec;
    spec.seed = seed++;
    spec.canvas_height = spec.canvas_width = canvas;
    items.push_back({spec, "", split});
  }
  for (int i = 0; i < n_pathological; ++i) {
    PhantomSpec spec;
    spec.seed = seed++;
    spec.canvas_height = spec.canvas_width = canvas;
    spec.pathology = i % 2 == 0 ? PathologyKind::kLipid : PathologyKind::kCalcium;
    spec.lesion_count = 2 + i % 3;
    items.push_back({spec, "", split});
  }
  return items;
}

LoadedSample load_sample(const DatasetManifest& manifest, const ManifestEntry& entry) {
  LoadedSample s;
  s.entry = entry;
  s.oct = read_image(manifest.resolve(entry.oct_path));
  s.he = read_image(manifest.resolve(entry.he_path));
  if (s.oct.channels != 1) {
    throw ConfigError(entry.oct_path + ": OCT images must be single-channel");
  }
  if (s.he.channels != 3) throw ConfigError(entry.he_path + ": H&E images must be RGB");
  if (!entry.layer_mask_path.empty()) s.layer_mask = read_png(manifest.resolve(entry.layer_mask_path));
  if (!entry.lesion_mask_path.empty()) {
    s.lesion_mask = read_png(manifest.resolve(entry.lesion_mask_path));
    for (auto& v : s.lesion_mask.data) v = v != 0 ? 1 : 0;
  }
  return s;
}

}  // namespace vstain::data
