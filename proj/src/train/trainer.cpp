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

#include "vstain/train/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "vstain/common.hpp"
#include "vstain/data/patches.hpp"
#include "vstain/nets/checkpoint.hpp"
#include "vstain/nets/scpa.hpp"
#include "vstain/nets/tensor_io.hpp"

namespace vstain::train {
namespace fs = std::filesystem;
using losses::AdversarialSide;
using losses::LossRecord;

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::kFull: return "full";
    case Ablation::kNoPa: return "no_pa";
    case Ablation::kNoSc: return "no_sc";
    case Ablation::kNeither: return "neither";
  }
  return "full";
}

Ablation ablation_from_string(const std::string& name) {
  for (Ablation a : {Ablation::kFull, Ablation::kNoPa, Ablation::kNoSc, Ablation::kNeither}) {
    if (to_string(a) == name) return a;
  }
  throw ConfigError("unknown ablation '" + name + "' (expected full, no_pa, no_sc or neither)");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (micro_batch < 1) throw ConfigError("micro_batch must be at least 1");
  if (!std::isfinite(lr0) || lr0 < 0.0) throw ConfigError("lr0 must be finite and nonnegative");
  if (decay_every < 1) throw ConfigError("decay_every must be at least 1");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be nonnegative");
  if (max_steps < 0) throw ConfigError("max_steps must be nonnegative");
  if (patch_size < 16 || patch_size % 16 != 0) {
    throw ConfigError("patch_size " + std::to_string(patch_size) + " is not a positive multiple of 16");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (discriminator_channels < 1) throw ConfigError("discriminator_channels must be positive");
  weights.validate();
}

nets::GeneratorConfig TrainConfig::generator_oh() const {
  nets::GeneratorConfig g = generator;
  g.in_channels = 1;
  g.out_channels = 3;
  g.patch_size = patch_size;
  return g;
}

nets::GeneratorConfig TrainConfig::generator_ho() const {
  nets::GeneratorConfig g = generator_oh();
  std::swap(g.in_channels, g.out_channels);
  return g;
}

nets::DiscriminatorConfig TrainConfig::discriminator_h() const { return {3, discriminator_channels}; }
nets::DiscriminatorConfig TrainConfig::discriminator_o() const { return {1, discriminator_channels}; }

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"batch_size", c.batch_size},
       {"lr0", c.lr0},
       {"decay_every", c.decay_every},
       {"epochs", c.epochs},
       {"weights", c.weights},
       {"ablation", to_string(c.ablation)},
       {"seed", c.seed},
       {"checkpoint_every", c.checkpoint_every},
       {"max_steps", c.max_steps},
       {"micro_batch", c.micro_batch},
       {"adam_beta1", c.adam_beta1},
       {"adam_beta2", c.adam_beta2},
       {"patch_size", c.patch_size},
       {"train_split", c.train_split},
       {"generator", c.generator},
       {"discriminator_channels", c.discriminator_channels}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  static const std::set<std::string> known = {
      "batch_size", "lr0",        "decay_every", "epochs",      "weights",   "ablation",
      "seed",       "checkpoint_every", "max_steps", "micro_batch", "adam_beta1", "adam_beta2",
      "patch_size", "train_split", "generator",  "discriminator_channels"};
  for (const auto& item : j.items()) {
    if (!known.contains(item.key())) throw ConfigError("unknown train config field '" + item.key() + "'");
  }
  try {
    TrainConfig d;
    c.batch_size = j.value("batch_size", d.batch_size);
    c.lr0 = j.value("lr0", d.lr0);
    c.decay_every = j.value("decay_every", d.decay_every);
    c.epochs = j.value("epochs", d.epochs);
    c.weights = j.value("weights", d.weights);
    c.ablation = ablation_from_string(j.value("ablation", to_string(d.ablation)));
    c.seed = j.value("seed", d.seed);
    c.checkpoint_every = j.value("checkpoint_every", d.checkpoint_every);
    c.max_steps = j.value("max_steps", d.max_steps);
    c.micro_batch = j.value("micro_batch", d.micro_batch);
    c.adam_beta1 = j.value("adam_beta1", d.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", d.adam_beta2);
    c.patch_size = j.value("patch_size", d.patch_size);
    c.train_split = j.value("train_split", d.train_split);
    c.generator = j.value("generator", d.generator);
    c.discriminator_channels = j.value("discriminator_channels", d.discriminator_channels);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed train config: ") + e.what());
  }
}

double lr_schedule(int epoch, const TrainConfig& config) {
  const double plateaus = std::ceil(static_cast<double>(config.epochs) / config.decay_every);
  const double step = std::floor(static_cast<double>(std::max(epoch, 0)) / config.decay_every);
  return std::max(0.0, config.lr0 * (1.0 - step / plateaus));
}

// --- data -------------------------------------------------------------------

TrainingData load_training_data(const data::DatasetManifest& manifest, const std::string& split,
                                int patch_size) {
  const auto entries = manifest.split(split);
  if (entries.empty()) throw ConfigError("manifest has no samples in split '" + split + "'");
  std::vector<torch::Tensor> oct, he, oct_layers, he_layers;
  std::vector<int64_t> oct_labels, he_labels;
  for (const auto& entry : entries) {
    const data::LoadedSample s = data::load_sample(manifest, entry);
    const data::MaskBundle masks{s.layer_mask, s.lesion_mask};
    for (const auto& p : data::extract_patches(s.oct, masks, data::Domain::kOct, entry.id, patch_size)) {
      oct.push_back(nets::image_to_tensor(p.image.pixels));
      oct_layers.push_back(nets::mask_to_tensor(p.masks.layer));
      oct_labels.push_back(p.pathology_label());
    }
    for (const auto& p : data::extract_patches(s.he, masks, data::Domain::kHe, entry.id, patch_size)) {
      he.push_back(nets::image_to_tensor(p.image.pixels));
      he_layers.push_back(nets::mask_to_tensor(p.masks.layer));
      he_labels.push_back(p.pathology_label());
    }
  }
  TrainingData d;
  d.oct = torch::stack(oct);
  d.he = torch::stack(he);
  d.oct_layers = torch::stack(oct_layers);
  d.he_layers = torch::stack(he_layers);
  d.oct_labels = torch::tensor(oct_labels, torch::kLong);
  d.he_labels = torch::tensor(he_labels, torch::kLong);
  return d;
}

Batch Batch::slice(int64_t begin, int64_t end) const {
  const int64_t n = end - begin;
  return {oct.narrow(0, begin, n),        he.narrow(0, begin, n),
          oct_layers.narrow(0, begin, n), he_layers.narrow(0, begin, n),
          oct_labels.narrow(0, begin, n), he_labels.narrow(0, begin, n)};
}

namespace {

std::vector<int64_t> permutation(int64_t n, std::uint64_t seed) {
  std::vector<int64_t> p(n);
  for (int64_t i = 0; i < n; ++i) p[i] = i;
  std::mt19937_64 rng(seed);
  for (int64_t i = n - 1; i > 0; --i) std::swap(p[i], p[rng() % static_cast<std::uint64_t>(i + 1)]);
  return p;
}

bool flip_bit(std::uint64_t seed, int epoch, int domain, int64_t index) {
  const std::uint64_t h = mix_seed(mix_seed(seed, 0x5eed0000ULL + 2 * epoch + domain), index);
  return (h >> 63) != 0;
}

torch::Tensor gather(const torch::Tensor& pool, const std::vector<int64_t>& idx, const std::vector<bool>& flip) {
  std::vector<torch::Tensor> items;
  items.reserve(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) {
    torch::Tensor t = pool[idx[i]];
    items.push_back(flip[i] ? t.flip({-1}) : t);
  }
  return torch::stack(items);
}

}  // namespace

BatchSchedule::BatchSchedule(int64_t oct_count, int64_t he_count, int batch_size, std::uint64_t seed)
    : oct_count_(oct_count), he_count_(he_count), pool_(std::max(oct_count, he_count)),
      batch_size_(batch_size), seed_(seed) {
  if (oct_count < 1 || he_count < 1) throw ConfigError("both patch pools must be non-empty");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  steps_per_epoch_ = (pool_ + batch_size - 1) / batch_size;
}

BatchSchedule::Selection BatchSchedule::select(int64_t step) const {
  const int epoch = epoch_of(step);
  const int64_t within = step % steps_per_epoch_;
  const auto perm_o = permutation(oct_count_, mix_seed(seed_, 2 * static_cast<std::uint64_t>(epoch)));
  const auto perm_h = permutation(he_count_, mix_seed(seed_, 2 * static_cast<std::uint64_t>(epoch) + 1));
  Selection s;
  const int64_t end = std::min(pool_, (within + 1) * batch_size_);
  for (int64_t pos = within * batch_size_; pos < end; ++pos) {
    s.oct.push_back(perm_o[pos % oct_count_]);
    s.he.push_back(perm_h[pos % he_count_]);
    s.oct_flip.push_back(flip_bit(seed_, epoch, 0, s.oct.back()));
    s.he_flip.push_back(flip_bit(seed_, epoch, 1, s.he.back()));
  }
  return s;
}

Batch BatchSchedule::batch(const TrainingData& data, int64_t step) const {
  const Selection s = select(step);
  const auto labels = [](const torch::Tensor& pool, const std::vector<int64_t>& idx) {
    return pool.index_select(0, torch::tensor(idx, torch::kLong));
  };
  return {gather(data.oct, s.oct, s.oct_flip),        gather(data.he, s.he, s.he_flip),
          gather(data.oct_layers, s.oct, s.oct_flip), gather(data.he_layers, s.he, s.he_flip),
          labels(data.oct_labels, s.oct),             labels(data.he_labels, s.he)};
}

// --- models and steps ---------------------------------------------------------

Models make_models(const TrainConfig& config) {
  torch::manual_seed(config.seed);
  Models m;
  m.g_oh = nets::Generator(config.generator_oh());
  m.g_ho = nets::Generator(config.generator_ho());
  m.d_h = nets::Discriminator(config.discriminator_h());
  m.d_o = nets::Discriminator(config.discriminator_o());
  return m;
}

TrainingAborted::TrainingAborted(std::int64_t step, std::string term, double value)
    : std::runtime_error("training aborted at step " + std::to_string(step) + ": loss term '" + term +
                         "' is " + std::to_string(value)),
      step_(step), term_(std::move(term)) {}

namespace {

// Parameters excluded from the generator objective by the ablation.
bool frozen_by_ablation(const std::string& name, Ablation a) {
  if (!sc_enabled(a) && nets::is_segmentation_head_param(name)) return true;
  if (!pa_enabled(a) && nets::is_classifier_param(name)) return true;
  return false;
}

std::vector<torch::Tensor> trainable(torch::nn::Module& module, Ablation a) {
  std::vector<torch::Tensor> out;
  for (auto& item : module.named_parameters()) {
    if (frozen_by_ablation(item.key(), a)) {
      item.value().set_requires_grad(false);
    } else {
      out.push_back(item.value());
    }
  }
  return out;
}

// Holds requires_grad off for a module's parameters within a scope.
class FreezeGuard {
 public:
  explicit FreezeGuard(std::initializer_list<torch::nn::Module*> modules) {
    for (auto* m : modules) {
      for (auto& p : m->parameters()) {
        if (p.requires_grad()) {
          p.set_requires_grad(false);
          frozen_.push_back(p);
        }
      }
    }
  }
  ~FreezeGuard() {
    for (auto& p : frozen_) p.set_requires_grad(true);
  }

 private:
  std::vector<torch::Tensor> frozen_;
};

void require_finite(const torch::Tensor& t, const char* name) {
  if (!t.defined()) return;
  const double v = t.item<double>();
  if (!std::isfinite(v)) throw NonFiniteLoss(name, v);
}

void add_parts(losses::LossParts& acc, const losses::LossParts& p) {
  acc.adv_OH += p.adv_OH;
  acc.adv_HO += p.adv_HO;
  acc.cycle += p.cycle;
  acc.embedding += p.embedding;
  acc.sc += p.sc;
  acc.pa += p.pa;
}

}  // namespace

Trainer::Trainer(TrainConfig config, Models models) : config_(std::move(config)), models_(std::move(models)) {
  config_.validate();
  std::vector<torch::Tensor> g = trainable(*models_.g_oh, config_.ablation);
  for (auto& p : trainable(*models_.g_ho, config_.ablation)) g.push_back(p);
  std::vector<torch::Tensor> d = models_.d_h->parameters();
  for (auto& p : models_.d_o->parameters()) d.push_back(p);
  const auto options = torch::optim::AdamOptions(config_.lr0).betas({config_.adam_beta1, config_.adam_beta2});
  opt_g_ = std::make_unique<torch::optim::Adam>(g, options);
  opt_d_ = std::make_unique<torch::optim::Adam>(d, options);
  lr_ = config_.lr0;
}

void Trainer::set_learning_rate(double lr) {
  for (auto* opt : {opt_g_.get(), opt_d_.get()}) {
    for (auto& group : opt->param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
  }
  lr_ = lr;
}

DiscriminatorLosses Trainer::discriminator_step(const Batch& batch) {
  const int64_t b = batch.size();
  opt_d_->zero_grad();
  DiscriminatorLosses out;
  for (int64_t begin = 0; begin < b; begin += config_.micro_batch) {
    const Batch c = batch.slice(begin, std::min(b, begin + config_.micro_batch));
    const double w = static_cast<double>(c.size()) / b;
    torch::Tensor fake_h, fake_o;
    {
      torch::NoGradGuard no_grad;
      fake_h = models_.g_oh(c.oct).image;
      fake_o = models_.g_ho(c.he).image;
    }
    const torch::Tensor lh =
        losses::adversarial_loss(models_.d_h(c.he), models_.d_h(fake_h), AdversarialSide::kDiscriminator);
    const torch::Tensor lo =
        losses::adversarial_loss(models_.d_o(c.oct), models_.d_o(fake_o), AdversarialSide::kDiscriminator);
    require_finite(lh, "D_H");
    require_finite(lo, "D_O");
    ((lh + lo) * w).backward();
    out.d_h += w * lh.item<double>();
    out.d_o += w * lo.item<double>();
  }
  opt_d_->step();
  return out;
}

LossRecord Trainer::generator_step(const Batch& batch) {
  FreezeGuard freeze({models_.d_h.ptr().get(), models_.d_o.ptr().get()});
  const int64_t b = batch.size();
  const bool sc_on = sc_enabled(config_.ablation), pa_on = pa_enabled(config_.ablation);
  const double normal_o = batch.oct_labels.eq(0).sum().item<double>();
  const double normal_h = batch.he_labels.eq(0).sum().item<double>();
  opt_g_->zero_grad();
  losses::LossParts parts;
  for (int64_t begin = 0; begin < b; begin += config_.micro_batch) {
    const Batch c = batch.slice(begin, std::min(b, begin + config_.micro_batch));
    const double w = static_cast<double>(c.size()) / b;

    const nets::GeneratorOutput oh = models_.g_oh(c.oct);
    const nets::GeneratorOutput ho = models_.g_ho(c.he);
    const torch::Tensor rec_o = models_.g_ho(oh.image).image;
    const torch::Tensor rec_h = models_.g_oh(ho.image).image;

    losses::LossTerms raw;
    raw.adv_OH = losses::adversarial_loss({}, models_.d_h(oh.image), AdversarialSide::kGenerator);
    raw.adv_HO = losses::adversarial_loss({}, models_.d_o(ho.image), AdversarialSide::kGenerator);
    raw.cycle = losses::cycle_loss(c.oct, rec_o) + losses::cycle_loss(c.he, rec_h);
    raw.embedding = losses::embedding_loss(oh.latent, models_.g_oh->latent(rec_o)) +
                    losses::embedding_loss(ho.latent, models_.g_ho->latent(rec_h));
    torch::Tensor sc_term;
    if (sc_on) {
      // Each direction averages over its own normal patches in the full batch.
      const torch::Tensor flags_o = c.oct_labels.eq(0), flags_h = c.he_labels.eq(0);
      const double share_o = normal_o > 0 ? flags_o.sum().item<double>() / normal_o : 0.0;
      const double share_h = normal_h > 0 ? flags_h.sum().item<double>() / normal_h : 0.0;
      const torch::Tensor sc_o = losses::structural_constraint_loss(oh.scpa.segmentation_logits, c.oct_layers, flags_o);
      const torch::Tensor sc_h = losses::structural_constraint_loss(ho.scpa.segmentation_logits, c.he_layers, flags_h);
      raw.sc = sc_o + sc_h;
      sc_term = share_o * sc_o + share_h * sc_h;
    }
    if (pa_on) {
      raw.pa = losses::pathology_awareness_loss(oh.scpa.pathology_logit, c.oct_labels) +
               losses::pathology_awareness_loss(ho.scpa.pathology_logit, c.he_labels);
    }
    require_finite(raw.adv_OH, "adv_OH");
    require_finite(raw.adv_HO, "adv_HO");
    require_finite(raw.cycle, "cycle");
    require_finite(raw.embedding, "embedding");
    require_finite(raw.sc, "sc");
    require_finite(raw.pa, "pa");

    losses::LossTerms scaled;
    scaled.adv_OH = w * raw.adv_OH;
    scaled.adv_HO = w * raw.adv_HO;
    scaled.cycle = w * raw.cycle;
    scaled.embedding = w * raw.embedding;
    scaled.sc = sc_term;
    if (pa_on) scaled.pa = w * raw.pa;
    losses::weighted_sum(scaled, config_.weights).backward();
    add_parts(parts, scaled.values());
  }
  opt_g_->step();
  return losses::total_loss(parts, config_.weights);
}

StepResult Trainer::train_step(const Batch& batch, std::int64_t step, const BatchSchedule& schedule) {
  set_learning_rate(lr_schedule(schedule.epoch_of(step), config_));
  StepResult r;
  try {
    r.discriminators = discriminator_step(batch);
    r.record = generator_step(batch);
  } catch (const NonFiniteLoss& e) {
    throw TrainingAborted(step + 1, e.term(), e.value());
  }
  return r;
}

// --- checkpoints ----------------------------------------------------------------

namespace {

constexpr const char* kStateFile = "trainer_state.json";

void save_optimizer(const torch::optim::Optimizer& opt, const fs::path& file) {
  torch::serialize::OutputArchive a;
  opt.save(a);
  a.save_to(file.string());
}

void load_optimizer(torch::optim::Optimizer& opt, const fs::path& file) {
  if (!fs::exists(file)) throw ConfigError("missing optimizer state " + file.string());
  torch::serialize::InputArchive a;
  a.load_from(file.string());
  opt.load(a);
}

}  // namespace

void Trainer::save(const fs::path& dir, std::int64_t step) const {
  fs::create_directories(dir);
  nets::save_module(*models_.g_oh, "generator", config_.generator_oh(), dir / "G_OH");
  nets::save_module(*models_.g_ho, "generator", config_.generator_ho(), dir / "G_HO");
  nets::save_module(*models_.d_h, "discriminator", config_.discriminator_h(), dir / "D_H");
  nets::save_module(*models_.d_o, "discriminator", config_.discriminator_o(), dir / "D_O");
  save_optimizer(*opt_g_, dir / "optim_G.pt");
  save_optimizer(*opt_d_, dir / "optim_D.pt");
  std::ofstream out(dir / kStateFile);
  out << nlohmann::json{{"step", step}, {"lr", lr_}, {"config", config_}}.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write " + (dir / kStateFile).string());
}

std::int64_t Trainer::load(const fs::path& dir) {
  std::ifstream in(dir / kStateFile);
  if (!in) throw ConfigError("missing " + (dir / kStateFile).string());
  const nlohmann::json state = nlohmann::json::parse(in);
  const TrainConfig saved = state.at("config").get<TrainConfig>();
  // Fields that change the optimization trajectory must agree.
  const std::vector<std::pair<const char*, bool>> checks = {
      {"batch_size", saved.batch_size == config_.batch_size},
      {"seed", saved.seed == config_.seed},
      {"lr0", saved.lr0 == config_.lr0},
      {"decay_every", saved.decay_every == config_.decay_every},
      {"weights", saved.weights == config_.weights},
      {"ablation", saved.ablation == config_.ablation},
      {"patch_size", saved.patch_size == config_.patch_size},
      {"adam betas", saved.adam_beta1 == config_.adam_beta1 && saved.adam_beta2 == config_.adam_beta2},
      {"train_split", saved.train_split == config_.train_split}};
  for (const auto& [field, ok] : checks) {
    if (!ok) throw ConfigError(std::string("checkpoint was trained with a different ") + field);
  }
  nets::load_module(*models_.g_oh, "generator", config_.generator_oh(), dir / "G_OH");
  nets::load_module(*models_.g_ho, "generator", config_.generator_ho(), dir / "G_HO");
  nets::load_module(*models_.d_h, "discriminator", config_.discriminator_h(), dir / "D_H");
  nets::load_module(*models_.d_o, "discriminator", config_.discriminator_o(), dir / "D_O");
  load_optimizer(*opt_g_, dir / "optim_G.pt");
  load_optimizer(*opt_d_, dir / "optim_D.pt");
  set_learning_rate(state.value("lr", config_.lr0));
  return state.at("step").get<std::int64_t>();
}

std::string step_checkpoint_name(std::int64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%06lld", static_cast<long long>(step));
  return buf;
}

// --- loss CSV -----------------------------------------------------------------

namespace {

constexpr const char* kCsvHeader = "step,adv_OH,adv_HO,cycle,embedding,sc,pa,total,lr";

std::string csv_row(std::int64_t step, const LossRecord& r, double lr) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%lld,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g",
                static_cast<long long>(step), r.adv_OH, r.adv_HO, r.cycle, r.embedding, r.sc, r.pa,
                r.total, lr);
  return buf;
}

}  // namespace

std::vector<CsvRow> read_loss_csv(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read " + file.string());
  std::vector<CsvRow> rows;
  std::string line;
  std::getline(in, line);
  if (line != kCsvHeader) throw ConfigError("unexpected loss CSV header in " + file.string());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    if (v.size() != 9) throw ConfigError("malformed loss CSV row: " + line);
    CsvRow r;
    r.step = static_cast<std::int64_t>(v[0]);
    r.record.adv_OH = v[1];
    r.record.adv_HO = v[2];
    r.record.cycle = v[3];
    r.record.embedding = v[4];
    r.record.sc = v[5];
    r.record.pa = v[6];
    r.record.total = v[7];
    r.lr = v[8];
    rows.push_back(r);
  }
  return rows;
}

// --- run ------------------------------------------------------------------------

RunResult run_training(const TrainConfig& config, const data::DatasetManifest& manifest, const fs::path& out_dir,
                       const std::optional<fs::path>& resume, const StepCallback& on_step) {
  config.validate();
  fs::create_directories(out_dir);
  {
    std::ofstream out(out_dir / "config.resolved.json");
    out << nlohmann::json(config).dump(2) << "\n";
  }
  const TrainingData data = load_training_data(manifest, config.train_split, config.patch_size);
  const BatchSchedule schedule(data.oct_count(), data.he_count(), config.batch_size, config.seed);
  std::int64_t total = schedule.steps_per_epoch() * config.epochs;
  if (config.max_steps > 0) total = std::min(total, config.max_steps);

  Trainer trainer(config, make_models(config));
  std::int64_t start = 0;
  const fs::path csv_path = out_dir / kLossCsv;
  std::vector<std::string> kept;
  if (resume) {
    start = trainer.load(*resume);
    if (fs::exists(csv_path)) {
      for (const CsvRow& row : read_loss_csv(csv_path)) {
        if (row.step <= start) kept.push_back(csv_row(row.step, row.record, row.lr));
      }
    }
  }
  std::ofstream csv(csv_path, std::ios::trunc);
  csv << kCsvHeader << "\n";
  for (const auto& line : kept) csv << line << "\n";
  csv.flush();

  RunResult result;
  for (std::int64_t step = start; step < total; ++step) {
    const StepResult r = trainer.train_step(schedule.batch(data, step), step, schedule);
    csv << csv_row(step + 1, r.record, trainer.learning_rate()) << "\n";
    csv.flush();
    result.records.push_back(r.record);
    if (on_step) on_step(step + 1, total, r);
    if (config.checkpoint_every > 0 && (step + 1) % config.checkpoint_every == 0) {
      trainer.save(out_dir / kCheckpointDir / step_checkpoint_name(step + 1), step + 1);
    }
  }
  result.steps = std::max(total, start);
  result.final_checkpoint = out_dir / kCheckpointDir / kFinalCheckpoint;
  trainer.save(result.final_checkpoint, result.steps);
  return result;
}

}  // namespace vstain::train
