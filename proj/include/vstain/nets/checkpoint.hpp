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

#ifndef VSTAIN_NETS_CHECKPOINT_HPP_
#define VSTAIN_NETS_CHECKPOINT_HPP_

#include <torch/torch.h>

#include <filesystem>
#include <string>

#include "nlohmann/json.hpp"

namespace vstain::nets {

// A checkpoint is <stem>.pt (named parameters and buffers) plus <stem>.json:
//   {"kind": ..., "architecture": {...}, "checksum": <parameter checksum>}

void save_module(const torch::nn::Module& module, const std::string& kind,
                 const nlohmann::json& architecture, const std::filesystem::path& stem);

// Reads the sidecar only.
nlohmann::json read_sidecar(const std::filesystem::path& stem);

// Loads parameters into an already-constructed module. Throws ConfigError when
// the sidecar kind or architecture differs from the expected one, or when the
// loaded parameters do not reproduce the recorded checksum.
void load_module(torch::nn::Module& module, const std::string& kind,
                 const nlohmann::json& architecture, const std::filesystem::path& stem);

}  // namespace vstain::nets

#endif  // VSTAIN_NETS_CHECKPOINT_HPP_
