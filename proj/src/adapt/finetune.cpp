#include "scenepipe/adapt/finetune.hpp"

#include <cmath>

#include "scenepipe/core/checkpoint.hpp"
#include "scenepipe/core/errors.hpp"
#include "scenepipe/losses/adversarial.hpp"
#include "scenepipe/losses/semantic.hpp"

namespace scenepipe::adapt {

namespace fs = std::filesystem;
using losses::GanKind;
using losses::GanMode;

namespace {

void set_requires_grad(torch::nn::Module& m, bool flag) {
  for (auto& p : m.parameters()) p.set_requires_grad(flag);
}

double checked(const torch::Tensor& t, const char* term) {
  const double v = t.item<double>();
  if (!std::isfinite(v)) throw NumericError(std::string("fine-tuning term '") + term + "' is not finite");
  return v;
}

}  // namespace

FreezePlan FreezePlan::from_config(const core::TrainConfig& cfg) {
  return {cfg.trainable_blocks, cfg.frozen_style_blocks};
}

std::vector<torch::Tensor> apply_freeze(StyleGenerator& g, const FreezePlan& plan) {
  const int64_t n = g->options().n_blocks;
  if (plan.trainable_block_count < 1 || plan.trainable_block_count > n) {
    throw ConfigError("freeze plan: trainable_block_count must lie in [1, " + std::to_string(n) + "]");
  }
  if (plan.freeze_injected_styles_upto < 0 || plan.freeze_injected_styles_upto > n) {
    throw ConfigError("freeze plan: freeze_injected_styles_upto must lie in [0, " + std::to_string(n) + "]");
  }
  set_requires_grad(*g, false);
  std::vector<torch::Tensor> trainable;
  for (int64_t b = n - plan.trainable_block_count; b < n; ++b) {
    for (auto& p : g->block_parameters(b)) trainable.push_back(p);
  }
  for (int64_t b = plan.freeze_injected_styles_upto; b < n; ++b) {
    for (auto& p : g->style_parameters(b)) trainable.push_back(p);
  }
  for (auto& p : trainable) p.set_requires_grad(true);
  return trainable;
}

nlohmann::ordered_json FinetuneReport::to_json() const {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["d_loss"] = d_loss;
  j["r1"] = r1;
  j["g_adv"] = g_adv;
  j["global"] = global;
  j["patch"] = patch;
  j["total"] = total;
  return j;
}

StyleFinetuner::StyleFinetuner(StyleGenerator source, StyleGenerator target, StyleDiscriminator disc,
                               const FreezePlan& plan, const core::TrainConfig& cfg,
                               std::shared_ptr<const priors::ImageEmbedder> embedder,
                               std::shared_ptr<const priors::PerceptualMetric> perceptual)
    : source_(std::move(source)),
      target_(std::move(target)),
      disc_(std::move(disc)),
      plan_(plan),
      cfg_(cfg),
      embedder_(std::move(embedder)),
      perceptual_(std::move(perceptual)) {
  if (!(source_->options() == target_->options())) throw ConfigError("source and target generators differ in architecture");
  if (!embedder_ || !perceptual_) throw PriorLoadError("fine-tuning needs an embedder and a perceptual metric");
  set_requires_grad(*source_, false);
  auto trainable = apply_freeze(target_, plan_);
  const auto g_opts = torch::optim::AdamOptions(cfg.finetune_lr).betas({cfg.finetune_beta1, cfg.finetune_beta2});
  opt_g_ = std::make_unique<torch::optim::Adam>(trainable, g_opts);
  opt_d_ = std::make_unique<torch::optim::Adam>(disc_->parameters(), g_opts);
}

torch::Tensor StyleFinetuner::sample_w(int64_t n, core::Rng& rng) {
  torch::NoGradGuard no_grad;
  return source_->map(rng.normal({n, source_->options().style_dim}));
}

FinetuneReport StyleFinetuner::step(const torch::Tensor& anime_batch, core::Rng& rng) {
  const int64_t res = target_->resolution();
  if (anime_batch.dim() != 4 || anime_batch.size(1) != 3 || anime_batch.size(2) != res || anime_batch.size(3) != res) {
    throw ShapeError("anime batch must be N x 3 x " + std::to_string(res) + " x " + std::to_string(res));
  }
  const int64_t n = anime_batch.size(0);
  FinetuneReport report;
  report.step = ++steps_;

  // discriminator
  {
    set_requires_grad(*disc_, true);
    torch::Tensor fake;
    {
      torch::NoGradGuard no_grad;
      fake = target_->forward(sample_w(n, rng));
    }
    torch::Tensor real = anime_batch.detach().clone().set_requires_grad(true);
    torch::Tensor s_real = disc_->forward(real);
    torch::Tensor s_fake = disc_->forward(fake);
    torch::Tensor d_loss = losses::adversarial_loss(s_real, s_fake, GanMode::discriminator, GanKind::nonsaturating);
    torch::Tensor d_total = d_loss;
    if (cfg_.r1_gamma > 0.0) {
      auto grad = torch::autograd::grad({s_real.sum()}, {real}, {}, true, true)[0];
      torch::Tensor r1 = grad.pow(2).sum({1, 2, 3}).mean();
      report.r1 = checked(r1, "r1");
      d_total = d_total + 0.5 * cfg_.r1_gamma * r1;
    }
    report.d_loss = checked(d_loss, "d_loss");
    opt_d_->zero_grad();
    d_total.backward();
    opt_d_->step();
  }

  // generator
  {
    set_requires_grad(*disc_, false);
    const torch::Tensor w = sample_w(n, rng);
    torch::Tensor x_p;
    {
      torch::NoGradGuard no_grad;
      x_p = source_->forward(w);
    }
    const torch::Tensor y_p = target_->forward(w);
    torch::Tensor g_adv = losses::adversarial_loss({}, disc_->forward(y_p), GanMode::generator, GanKind::nonsaturating);
    torch::Tensor total = g_adv;
    report.g_adv = checked(g_adv, "g_adv");
    if (cfg_.lambda_global > 0.0) {
      auto global = losses::global_semantic_loss(x_p, y_p, *embedder_, *perceptual_, cfg_.lambda_lpips);
      report.global = checked(global, "global");
      total = total + cfg_.lambda_global * global;
    }
    if (cfg_.lambda_patch > 0.0) {
      auto patch = losses::finetune_patch_loss(x_p, y_p, *embedder_, cfg_.patch_count_finetune,
                                               cfg_.patch_size_finetune, rng);
      report.patch = checked(patch, "patch");
      total = total + cfg_.lambda_patch * patch;
    }
    report.total = checked(total, "total");
    opt_g_->zero_grad();
    total.backward();
    opt_g_->step();
    set_requires_grad(*disc_, true);
  }
  return report;
}

std::pair<StyleGenerator, StyleGenerator> make_generator_pair(const StyleGeneratorOptions& options, core::Rng& rng,
                                                              int64_t w_avg_samples) {
  core::Rng init_rng = rng.fork("style-generator-init");
  StyleGenerator source(options, init_rng);
  core::Rng avg_rng = rng.fork("w-avg");
  source->update_w_avg(avg_rng, w_avg_samples);
  core::Rng scratch(0);
  StyleGenerator target(options, scratch);
  core::copy_module_state(*source, *target);
  return {source, target};
}

core::PseudoPair sample_pair(StyleGenerator& g_s, StyleGenerator& g_t, int64_t seed, double psi) {
  if (!(g_s->options() == g_t->options())) throw ConfigError("pseudo pairs need generators with identical architecture");
  if (!(psi > 0.0 && psi <= 1.0)) throw ArgumentError("truncation must lie in (0,1]");
  torch::NoGradGuard no_grad;
  core::Rng rng(core::derive_seed(static_cast<uint64_t>(seed), {core::tag_hash("pair-latent")}));
  const torch::Tensor w = g_s->truncate(g_s->map(rng.normal({1, g_s->options().style_dim})), psi);
  return {core::ImageTensor::from_tensor(g_s->forward(w)), core::ImageTensor::from_tensor(g_t->forward(w)), seed,
          std::nullopt};
}

core::Manifest generate_pseudo_dataset(StyleGenerator& g_s, StyleGenerator& g_t, int64_t n, double psi,
                                       const fs::path& out_dir, int64_t first_seed) {
  if (n < 0) throw ArgumentError("pair count must be non-negative");
  std::error_code ec;
  fs::create_directories(core::pairs_dir(out_dir), ec);
  if (ec) throw PersistenceError("cannot create '" + out_dir.string() + "': " + ec.message());
  core::Manifest manifest;
  manifest.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const auto pair = sample_pair(g_s, g_t, first_seed + i, psi);
    core::save_pair(pair, out_dir);
    manifest.push_back({pair.seed, std::nullopt, std::nullopt, std::nullopt});
  }
  core::write_manifest(manifest, core::manifest_path(out_dir));
  return manifest;
}

void save_generator(StyleGenerator& g, const fs::path& path) {
  core::CheckpointWriter writer("style_generator", g->options().to_json());
  writer.add_module("generator", *g);
  writer.save(path);
}

StyleGenerator load_generator(const fs::path& path) {
  core::CheckpointReader reader(path, "style_generator");
  StyleGeneratorOptions options;
  try {
    options = StyleGeneratorOptions::from_json(reader.architecture());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad generator architecture header: ") + e.what());
  }
  core::Rng scratch(0);
  StyleGenerator g(options, scratch);
  reader.load_module("generator", *g);
  return g;
}

void save_discriminator(StyleDiscriminator& d, const StyleGeneratorOptions& options, const fs::path& path) {
  core::CheckpointWriter writer("style_discriminator", options.to_json());
  writer.add_module("discriminator", *d);
  writer.save(path);
}

StyleDiscriminator load_discriminator(const fs::path& path) {
  core::CheckpointReader reader(path, "style_discriminator");
  StyleGeneratorOptions options;
  try {
    options = StyleGeneratorOptions::from_json(reader.architecture());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad discriminator architecture header: ") + e.what());
  }
  core::Rng scratch(0);
  StyleDiscriminator d(options, scratch);
  reader.load_module("discriminator", *d);
  return d;
}

}  // namespace scenepipe::adapt
