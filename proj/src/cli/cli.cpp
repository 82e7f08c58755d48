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

#include "vstain/cli/cli.hpp"

#include <torch/torch.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "vstain/common.hpp"
#include "vstain/data/png_io.hpp"
#include "vstain/metrics/blindtest.hpp"
#include "vstain/nets/init.hpp"
#include "vstain/nets/tensor_io.hpp"

namespace vstain::cli {
namespace fs = std::filesystem;

std::optional<std::uint64_t> seed_override() {
  const char* raw = std::getenv(kSeedVariable);
  if (!raw || !*raw) return std::nullopt;
  const std::string text(raw);
  std::uint64_t value = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw ConfigError(std::string(kSeedVariable) + " must be an unsigned integer, got '" + text + "'");
  }
  return value;
}

void write_resolved(const fs::path& out_dir, const std::string& command, const nlohmann::json& doc) {
  fs::create_directories(out_dir);
  const fs::path file = out_dir / (command + ".resolved.json");
  std::ofstream out(file);
  out << doc.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write " + file.string());
}

namespace {

nlohmann::json read_json(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read " + file.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed JSON in " + file.string() + ": " + e.what());
  }
}

std::string abs_path(const fs::path& p) { return fs::absolute(p).lexically_normal().string(); }

// Applies SCPAT_SEED to `seed`, logging the override. Returns the seed source.
std::string apply_seed_override(std::uint64_t& seed, std::ostream& log) {
  if (const auto s = seed_override()) {
    log << kSeedVariable << "=" << *s << " overrides seed " << seed << "\n";
    seed = *s;
    return kSeedVariable;
  }
  return "config";
}

bool is_png(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png";
}

int64_t round_up(int64_t v, int64_t m) { return (v + m - 1) / m * m; }

// --- commands -------------------------------------------------------------------

void phantom_gen(const fs::path& spec_file, const fs::path& out, std::ostream& log) {
  const nlohmann::json spec = read_json(spec_file);
  const auto items = data::parse_dataset_spec(spec);
  write_resolved(out, "phantom-gen", {{"command", "phantom-gen"}, {"spec", spec}, {"out", abs_path(out)}});
  const data::DatasetManifest m = data::build_dataset(items, out);
  log << "wrote " << m.entries.size() << " phantoms to " << out.string() << " (manifest " << m.checksum() << ")\n";
}

train::TrainConfig load_train_config(const fs::path& file) {
  try {
    return read_json(file).get<train::TrainConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed train config " + file.string() + ": " + e.what());
  }
}

void train_command(const fs::path& config_file, const fs::path& manifest_file, const fs::path& out,
                   const std::string& resume, std::ostream& log) {
  train::TrainConfig config = load_train_config(config_file);
  const std::string seed_source = apply_seed_override(config.seed, log);
  config.validate();
  const data::DatasetManifest manifest = data::DatasetManifest::load(manifest_file);
  nlohmann::json resolved = {{"command", "train"},          {"config", config},
                             {"data", abs_path(manifest_file)}, {"manifest_checksum", manifest.checksum()},
                             {"out", abs_path(out)},          {"seed_source", seed_source}};
  if (!resume.empty()) resolved["resume"] = abs_path(resume);
  write_resolved(out, "train", resolved);
  const auto result = train::run_training(
      config, manifest, out, resume.empty() ? std::nullopt : std::optional<fs::path>(resume),
      [&](int64_t step, int64_t total, const train::StepResult& r) {
        if (step == 1 || step == total || step % 10 == 0) {
          char line[256];
          std::snprintf(line, sizeof line, "step %lld/%lld total %.5f cycle %.5f sc %.5f pa %.5f D_H %.5f D_O %.5f\n",
                        static_cast<long long>(step), static_cast<long long>(total), r.record.total,
                        r.record.cycle, r.record.sc, r.record.pa, r.discriminators.d_h, r.discriminators.d_o);
          log << line << std::flush;
        }
      });
  log << "final checkpoint " << result.final_checkpoint.string() << " after " << result.steps << " steps\n";
}

void evaluate_command(const fs::path& checkpoint, const fs::path& manifest_file, const fs::path& out,
                      const metrics::EvaluateOptions& options, std::ostream& log) {
  const data::DatasetManifest manifest = data::DatasetManifest::load(manifest_file);
  write_resolved(out, "evaluate",
                 {{"command", "evaluate"},
                  {"checkpoint", abs_path(checkpoint)},
                  {"data", abs_path(manifest_file)},
                  {"manifest_checksum", manifest.checksum()},
                  {"split", options.split},
                  {"grid_rows", options.grid_rows},
                  {"extractor_checksum", metrics::kExtractorChecksum},
                  {"out", abs_path(out)}});
  const metrics::Report r = metrics::evaluate_model(checkpoint, manifest, out, options);
  log << r.to_json().dump() << "\n";
}

std::vector<fs::path> pngs_in(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError(dir.string() + " is not a directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && is_png(e.path())) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void blindtest_export(const fs::path& real_dir, const fs::path& virtual_dir, const fs::path& out, std::uint64_t seed,
                      std::ostream& log) {
  const std::string seed_source = apply_seed_override(seed, log);
  std::vector<metrics::BlindTestItem> items;
  for (const auto& p : pngs_in(real_dir)) items.push_back({abs_path(p), abs_path(p), metrics::Truth::kReal});
  for (const auto& p : pngs_in(virtual_dir)) items.push_back({abs_path(p), abs_path(p), metrics::Truth::kVirtual});
  if (items.empty()) throw ConfigError("blindtest export: no PNG images found");
  metrics::BlindTestManifest m = metrics::BlindTestManifest::create(std::move(items), seed);
  // Neutral ids and copied files so names do not reveal the source pool.
  fs::create_directories(out / "images");
  nlohmann::json sources = nlohmann::json::object();
  for (size_t i = 0; i < m.items.size(); ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "item_%03zu", i);
    const fs::path rel = fs::path("images") / (std::string(id) + ".png");
    fs::copy_file(m.items[i].image_path, out / rel, fs::copy_options::overwrite_existing);
    sources[id] = m.items[i].image_path;
    m.items[i].id = id;
    m.items[i].image_path = rel.string();
  }
  write_resolved(out, "blindtest-export",
                 {{"command", "blindtest export"},
                  {"real", abs_path(real_dir)},
                  {"virtual", abs_path(virtual_dir)},
                  {"seed", seed},
                  {"seed_source", seed_source},
                  {"out", abs_path(out)}});
  nlohmann::json key = m.to_json();
  key["sources"] = sources;
  {
    std::ofstream k(out / "answer_key.json");
    k << key.dump(2) << "\n";
  }
  metrics::export_rater_sheet(m, out / "rater_sheet.csv");
  log << "exported " << m.items.size() << " items to " << (out / "rater_sheet.csv").string() << "\n";
}

void blindtest_score(const fs::path& key_file, const fs::path& responses_file, const fs::path& out,
                     std::ostream& log) {
  const metrics::BlindTestManifest m = metrics::BlindTestManifest::from_json(read_json(key_file));
  const metrics::Confusion c = metrics::blind_test(m, metrics::read_responses(responses_file));
  write_resolved(out, "blindtest-score",
                 {{"command", "blindtest score"},
                  {"key", abs_path(key_file)},
                  {"responses", abs_path(responses_file)},
                  {"out", abs_path(out)}});
  std::ofstream file(out / "confusion.json");
  file << c.to_json().dump(2) << "\n";
  log << c.to_json().dump() << "\n";
}

void ablate_command(const fs::path& config_file, const fs::path& manifest_file, const fs::path& out,
                    const std::string& eval_split, std::ostream& log) {
  train::TrainConfig base = load_train_config(config_file);
  const std::string seed_source = apply_seed_override(base.seed, log);
  base.validate();
  const data::DatasetManifest manifest = data::DatasetManifest::load(manifest_file);
  write_resolved(out, "ablate",
                 {{"command", "ablate"},
                  {"config", base},
                  {"data", abs_path(manifest_file)},
                  {"manifest_checksum", manifest.checksum()},
                  {"eval_split", eval_split},
                  {"seed_source", seed_source},
                  {"out", abs_path(out)}});
  ablate(base, manifest, out, eval_split, log);
}

}  // namespace

// --- stain ----------------------------------------------------------------------------

std::vector<StainedImage> stain(const fs::path& checkpoint, const fs::path& input, const fs::path& out_dir,
                                std::ostream& log) {
  nets::Generator g = metrics::load_generator(checkpoint / "G_OH");
  if (g->config().in_channels != 1 || g->config().out_channels != 3) {
    throw ConfigError("checkpoint G_OH is not an OCT to H&E generator");
  }
  g->eval();
  std::vector<fs::path> files;
  if (fs::is_directory(input)) {
    for (const auto& e : fs::directory_iterator(input)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  } else if (fs::is_regular_file(input)) {
    files.push_back(input);
  } else {
    throw ConfigError("stain input " + input.string() + " does not exist");
  }
  fs::create_directories(out_dir);
  const std::string generator_checksum = nets::parameter_checksum(*g);
  std::vector<StainedImage> results;
  torch::NoGradGuard no_grad;
  for (const fs::path& file : files) {
    if (!is_png(file)) {
      log << "warning: skipping non-PNG input " << file.string() << "\n";
      continue;
    }
    data::Image image;
    try {
      image = data::read_image(file);
    } catch (const std::exception& e) {
      log << "warning: skipping unreadable image " << file.string() << ": " << e.what() << "\n";
      continue;
    }
    torch::Tensor x = nets::image_to_tensor(image);
    const bool from_rgb = x.size(0) != 1;
    if (from_rgb) {
      log << "warning: " << file.string() << " has " << x.size(0) << " channels; using their mean as OCT\n";
      x = x.mean(0, /*keepdim=*/true);
    }
    const int64_t h = x.size(1), w = x.size(2);
    const int64_t ph = round_up(h, 8), pw = round_up(w, 8);
    x = x.unsqueeze(0);
    if (ph != h || pw != w) {
      namespace F = torch::nn::functional;
      x = F::pad(x, F::PadFuncOptions({0, pw - w, 0, ph - h}).mode(torch::kReplicate));
    }
    const nets::GeneratorOutput y = g->forward(x);
    const torch::Tensor he = y.image[0].narrow(1, 0, h).narrow(2, 0, w);
    const torch::Tensor seg = y.scpa.segmentation_logits[0].argmax(0).narrow(0, 0, h).narrow(1, 0, w);
    const double logit = y.scpa.pathology_logit.reshape({-1})[0].item<double>();

    StainedImage r;
    const std::string stem = file.stem().string();
    r.input = file;
    r.image = out_dir / (stem + "_he.png");
    r.segmentation = out_dir / (stem + "_seg.png");
    r.sidecar = out_dir / (stem + ".json");
    r.pathology_probability = 1.0 / (1.0 + std::exp(-logit));
    data::write_image(r.image, nets::tensor_to_image(he));
    data::write_png(r.segmentation, nets::tensor_to_mask(seg));
    const nlohmann::json sidecar = {{"input", abs_path(file)},
                                    {"image", r.image.filename().string()},
                                    {"segmentation", r.segmentation.filename().string()},
                                    {"segmentation_labels", {"intima", "media", "adventitia"}},
                                    {"pathology_logit", logit},
                                    {"pathology_probability", r.pathology_probability},
                                    {"input_size", {h, w}},
                                    {"padded_size", {ph, pw}},
                                    {"padding", {{"bottom", ph - h}, {"right", pw - w}, {"mode", "replicate"}}},
                                    {"converted_from_rgb", from_rgb},
                                    {"checkpoint", abs_path(checkpoint)},
                                    {"generator_checksum", generator_checksum}};
    std::ofstream out(r.sidecar);
    out << sidecar.dump(2) << "\n";
    if (!out) throw std::runtime_error("cannot write " + r.sidecar.string());
    results.push_back(r);
  }
  log << "stained " << results.size() << " image(s) into " << out_dir.string() << "\n";
  return results;
}

// --- ablate --------------------------------------------------------------------------

std::string variant_name(train::Ablation a) {
  switch (a) {
    case train::Ablation::kFull: return "SCPAT-GAN";
    case train::Ablation::kNoPa: return "SCT-GAN";
    case train::Ablation::kNoSc: return "PAT-GAN";
    case train::Ablation::kNeither: return "T-GAN";
  }
  return "";
}

std::vector<AblationRow> ablate(const train::TrainConfig& base, const data::DatasetManifest& manifest,
                                const fs::path& out_dir, const std::string& eval_split, std::ostream& log) {
  std::vector<AblationRow> rows;
  for (train::Ablation a :
       {train::Ablation::kFull, train::Ablation::kNoPa, train::Ablation::kNoSc, train::Ablation::kNeither}) {
    train::TrainConfig config = base;
    config.ablation = a;
    const fs::path dir = out_dir / train::to_string(a);
    log << "ablation " << train::to_string(a) << " (" << variant_name(a) << ")\n" << std::flush;
    const train::RunResult run = train::run_training(config, manifest, dir);
    metrics::EvaluateOptions options;
    options.split = eval_split;
    AblationRow row{a, variant_name(a), metrics::evaluate_model(run.final_checkpoint, manifest, dir / "eval", options),
                    run.records.empty() ? 0.0 : run.records.back().cycle};
    log << "  " << row.report.to_json().dump() << " final cycle " << row.final_cycle << "\n";
    rows.push_back(row);
  }
  std::ofstream csv(out_dir / "ablation.csv");
  csv << "variant,fid,phv1,phv2,phv3\n";
  std::ofstream md(out_dir / "ablation.md");
  md << "| Method | FID | PHV1 | PHV2 | PHV3 |\n|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    char line[256];
    std::snprintf(line, sizeof line, "%s,%.6f,%.6f,%.6f,%.6f\n", r.variant.c_str(), r.report.fid, r.report.phv1,
                  r.report.phv2, r.report.phv3);
    csv << line;
    std::snprintf(line, sizeof line, "| %s | %.2f | %.2f | %.2f | %.2f |\n", r.variant.c_str(), r.report.fid,
                  r.report.phv1, r.report.phv2, r.report.phv3);
    md << line;
  }
  if (!csv || !md) throw std::runtime_error("cannot write the ablation table under " + out_dir.string());
  return rows;
}

// --- entry point ------------------------------------------------------------------------

int run(const std::vector<std::string>& args, std::ostream& log) {
  CLI::App app{"Virtual staining of OCT images with structural and pathology guidance", "vstain"};
  app.require_subcommand(1);

  std::string spec, out, config, manifest, checkpoint, input, resume, real_dir, virtual_dir, key, responses;
  std::string split = "test";
  int grid_rows = 4;
  std::uint64_t seed = 0;

  auto* gen = app.add_subcommand("phantom-gen", "render a phantom dataset from a description file");
  gen->add_option("--spec", spec, "dataset description JSON")->required();
  gen->add_option("--out", out, "output directory")->required();

  auto* tr = app.add_subcommand("train", "train the four networks");
  tr->add_option("--config", config, "TrainConfig JSON")->required();
  tr->add_option("--data", manifest, "dataset manifest")->required();
  tr->add_option("--out", out, "output directory")->required();
  tr->add_option("--resume", resume, "checkpoint directory to resume from");

  auto* st = app.add_subcommand("stain", "translate OCT images to virtual H&E");
  st->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  st->add_option("--input", input, "OCT PNG or directory of PNGs")->required();
  st->add_option("--out", out, "output directory")->required();

  auto* ev = app.add_subcommand("evaluate", "score a checkpoint on held-out phantoms");
  ev->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  ev->add_option("--data", manifest, "dataset manifest")->required();
  ev->add_option("--out", out, "output directory")->required();
  ev->add_option("--split", split, "manifest split to evaluate")->capture_default_str();
  ev->add_option("--grid-rows", grid_rows, "patches per side-by-side grid")->capture_default_str();

  auto* bt = app.add_subcommand("blindtest", "blind real/virtual rating protocol");
  bt->require_subcommand(1);
  auto* bt_export = bt->add_subcommand("export", "shuffle real and virtual images into a rater sheet");
  bt_export->add_option("--real", real_dir, "directory of real H&E PNGs")->required();
  bt_export->add_option("--virtual", virtual_dir, "directory of virtual H&E PNGs")->required();
  bt_export->add_option("--out", out, "output directory")->required();
  bt_export->add_option("--seed", seed, "presentation shuffle seed")->capture_default_str();
  auto* bt_score = bt->add_subcommand("score", "tally rater responses against the answer key");
  bt_score->add_option("--key", key, "answer_key.json from export")->required();
  bt_score->add_option("--responses", responses, "CSV id,response")->required();
  bt_score->add_option("--out", out, "output directory")->required();

  auto* ab = app.add_subcommand("ablate", "train and evaluate the four ablation variants");
  ab->add_option("--config", config, "base TrainConfig JSON")->required();
  ab->add_option("--data", manifest, "dataset manifest")->required();
  ab->add_option("--out", out, "output directory")->required();
  ab->add_option("--split", split, "manifest split to evaluate")->capture_default_str();

  std::vector<const char*> argv{"vstain"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    std::ostringstream text, err;
    const int code = app.exit(e, text, err);
    log << text.str() << err.str();
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (*gen) {
      phantom_gen(spec, out, log);
    } else if (*tr) {
      train_command(config, manifest, out, resume, log);
    } else if (*st) {
      write_resolved(out, "stain",
                     {{"command", "stain"}, {"checkpoint", abs_path(checkpoint)}, {"input", abs_path(input)},
                      {"out", abs_path(out)}});
      stain(checkpoint, input, out, log);
    } else if (*ev) {
      metrics::EvaluateOptions options;
      options.split = split;
      options.grid_rows = grid_rows;
      evaluate_command(checkpoint, manifest, out, options, log);
    } else if (*bt_export) {
      blindtest_export(real_dir, virtual_dir, out, seed, log);
    } else if (*bt_score) {
      blindtest_score(key, responses, out, log);
    } else if (*ab) {
      ablate_command(config, manifest, out, split, log);
    }
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const train::TrainingAborted& e) {
    log << "aborted: " << e.what() << "\n";
    return kExitTrainingAborted;
  } catch (const NonFiniteLoss& e) {
    log << "aborted: " << e.what() << "\n";
    return kExitTrainingAborted;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cerr);
}

}  // namespace vstain::cli
