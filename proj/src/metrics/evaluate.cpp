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

#include "vstain/metrics/evaluate.hpp"

#include <cstdio>
#include <fstream>

#include "vstain/common.hpp"
#include "vstain/data/patches.hpp"
#include "vstain/data/png_io.hpp"
#include "vstain/metrics/similarity.hpp"
#include "vstain/nets/checkpoint.hpp"
#include "vstain/nets/tensor_io.hpp"

namespace vstain::metrics {
namespace fs = std::filesystem;

nlohmann::json Report::to_json() const {
  return {{"fid", fid}, {"phv1", phv1}, {"phv2", phv2}, {"phv3", phv3}, {"n_images", n_images}};
}

Report compare_pools(FeatureExtractorImpl& extractor, const torch::Tensor& a, const torch::Tensor& b) {
  if (a.dim() != 4 || a.sizes() != b.sizes()) throw ConfigError("compare_pools: pools must share one [N, C, H, W] shape");
  if (a.size(0) < 2) throw ConfigError("compare_pools needs at least two images per pool");
  torch::NoGradGuard no_grad;
  Report r;
  r.n_images = a.size(0);
  std::vector<torch::Tensor> fa, fb;
  double phv_sum[3] = {0.0, 0.0, 0.0};
  for (int64_t k = 0; k < a.size(0); ++k) {
    const auto la = extractor.forward(a[k].unsqueeze(0));
    const auto lb = extractor.forward(b[k].unsqueeze(0));
    for (int i = 0; i < 3; ++i) phv_sum[i] += phv_bits(la[i][0], lb[i][0]);
    std::vector<torch::Tensor> pa, pb;
    for (int i = 0; i < 3; ++i) {
      pa.push_back(la[i].mean({2, 3}));
      pb.push_back(lb[i].mean({2, 3}));
    }
    fa.push_back(torch::cat(pa, 1));
    fb.push_back(torch::cat(pb, 1));
  }
  r.fid = fid(to_eigen(torch::cat(fa)), to_eigen(torch::cat(fb)));
  r.phv1 = phv_sum[0] / r.n_images;
  r.phv2 = phv_sum[1] / r.n_images;
  r.phv3 = phv_sum[2] / r.n_images;
  return r;
}

torch::Tensor stain(nets::GeneratorImpl& oct_to_he, const torch::Tensor& oct, std::int64_t chunk) {
  torch::NoGradGuard no_grad;
  const bool was_training = oct_to_he.is_training();
  oct_to_he.eval();
  std::vector<torch::Tensor> out;
  for (int64_t begin = 0; begin < oct.size(0); begin += chunk) {
    out.push_back(oct_to_he.forward(oct.narrow(0, begin, std::min(chunk, oct.size(0) - begin))).image);
  }
  oct_to_he.train(was_training);
  return torch::cat(out);
}

nets::Generator load_generator(const fs::path& stem) {
  const nlohmann::json sidecar = nets::read_sidecar(stem);
  nets::GeneratorConfig config;
  try {
    config = sidecar.at("architecture").get<nets::GeneratorConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("checkpoint " + stem.string() + " has a malformed architecture: " + e.what());
  }
  nets::Generator g(config);
  nets::load_module(*g, "generator", sidecar.at("architecture"), stem);
  return g;
}

Report evaluate_model(const fs::path& checkpoint, const data::DatasetManifest& manifest, const fs::path& out_dir,
                      const EvaluateOptions& options) {
  nets::Generator g = load_generator(checkpoint / "G_OH");
  if (g->config().in_channels != 1 || g->config().out_channels != 3) {
    throw ConfigError("checkpoint G_OH is not an OCT to H&E generator");
  }
  const auto entries = manifest.split(options.split);
  if (entries.empty()) throw ConfigError("manifest has no samples in split '" + options.split + "'");
  std::vector<torch::Tensor> oct, he;
  for (const auto& entry : entries) {
    const data::LoadedSample s = data::load_sample(manifest, entry);
    const data::MaskBundle masks{s.layer_mask, s.lesion_mask};
    const int size = g->config().patch_size;
    for (const auto& p : data::extract_patches(s.oct, masks, data::Domain::kOct, entry.id, size)) {
      oct.push_back(nets::image_to_tensor(p.image.pixels));
    }
    for (const auto& p : data::extract_patches(s.he, masks, data::Domain::kHe, entry.id, size)) {
      he.push_back(nets::image_to_tensor(p.image.pixels));
    }
  }
  if (oct.empty()) throw ConfigError("split '" + options.split + "' yields no patches");
  const torch::Tensor oct_pool = torch::stack(oct), real = torch::stack(he);
  const torch::Tensor virt = stain(*g, oct_pool);

  FeatureExtractor extractor = load_extractor();
  const Report report = compare_pools(*extractor, virt, real);

  fs::create_directories(out_dir / "grids");
  {
    std::ofstream out(out_dir / "report.json");
    out << report.to_json().dump(2) << "\n";
    if (!out) throw std::runtime_error("cannot write " + (out_dir / "report.json").string());
  }
  const int64_t rows = std::max(1, options.grid_rows);
  for (int64_t begin = 0, index = 0; begin < virt.size(0); begin += rows, ++index) {
    std::vector<torch::Tensor> lines;
    for (int64_t k = begin; k < std::min(virt.size(0), begin + rows); ++k) {
      lines.push_back(torch::cat({oct_pool[k].expand({3, -1, -1}), virt[k], real[k]}, 2));
    }
    char name[32];
    std::snprintf(name, sizeof name, "grid_%03lld.png", static_cast<long long>(index));
    data::write_image(out_dir / "grids" / name, nets::tensor_to_image(torch::cat(lines, 1)));
  }
  return report;
}

}  // namespace vstain::metrics
