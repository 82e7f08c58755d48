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

#include "vstain/nets/checkpoint.hpp"

#include <fstream>

#include "vstain/common.hpp"
#include "vstain/nets/init.hpp"

namespace vstain::nets {
namespace fs = std::filesystem;

namespace {

fs::path with_ext(const fs::path& stem, const char* ext) {
  fs::path p = stem;
  p += ext;
  return p;
}

}  // namespace

void save_module(const torch::nn::Module& module, const std::string& kind,
                 const nlohmann::json& architecture, const fs::path& stem) {
  if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
  torch::serialize::OutputArchive archive;
  module.save(archive);
  archive.save_to(with_ext(stem, ".pt").string());
  const nlohmann::json sidecar = {
      {"kind", kind}, {"architecture", architecture}, {"checksum", parameter_checksum(module)}};
  std::ofstream out(with_ext(stem, ".json"));
  out << sidecar.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write " + with_ext(stem, ".json").string());
}

nlohmann::json read_sidecar(const fs::path& stem) {
  const fs::path path = with_ext(stem, ".json");
  std::ifstream in(path);
  if (!in) throw ConfigError("missing checkpoint sidecar " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed checkpoint sidecar " + path.string() + ": " + e.what());
  }
}

void load_module(torch::nn::Module& module, const std::string& kind,
                 const nlohmann::json& architecture, const fs::path& stem) {
  const nlohmann::json sidecar = read_sidecar(stem);
  if (sidecar.value("kind", std::string()) != kind) {
    throw ConfigError("checkpoint " + stem.string() + " holds a " +
                      sidecar.value("kind", std::string("?")) + ", expected " + kind);
  }
  if (sidecar.at("architecture") != architecture) {
    throw ConfigError("architecture mismatch for " + stem.string() + ": checkpoint has " +
                      sidecar.at("architecture").dump() + ", config has " + architecture.dump());
  }
  const fs::path pt = with_ext(stem, ".pt");
  if (!fs::exists(pt)) throw ConfigError("missing checkpoint archive " + pt.string());
  torch::serialize::InputArchive archive;
  archive.load_from(pt.string());
  {
    torch::NoGradGuard no_grad;
    module.load(archive);
  }
  const std::string checksum = parameter_checksum(module);
  if (checksum != sidecar.value("checksum", std::string())) {
    throw ConfigError("checksum mismatch for " + pt.string());
  }
}

}  // namespace vstain::nets
