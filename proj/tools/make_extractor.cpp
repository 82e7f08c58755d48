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

// Regenerates the committed feature-extractor artifact from its seed and
// prints the parameter checksum to pin in extractor.hpp.
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "vstain/metrics/extractor.hpp"
#include "vstain/nets/init.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Write the fixed feature extractor"};
  std::string out = vstain::metrics::default_extractor_stem().string();
  app.add_option("--out", out, "output stem (writes <stem>.pt and <stem>.json)");
  CLI11_PARSE(app, argc, argv);
  const auto extractor = vstain::metrics::make_extractor();
  std::filesystem::create_directories(std::filesystem::path(out).parent_path());
  vstain::metrics::save_extractor(*extractor, out);
  std::cout << vstain::nets::parameter_checksum(*extractor) << std::endl;
  return 0;
}
