#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "scenepipe/adapt/style_generator.hpp"
#include "scenepipe/core/config.hpp"
#include "scenepipe/core/dataset.hpp"
#include "scenepipe/core/rng.hpp"
#include "scenepipe/priors/priors.hpp"

namespace scenepipe::adapt {

// Which parts of the target generator may change during fine-tuning. The
// last `trainable_block_count` synthesis blocks are trainable; the style
// affines injected into the first `freeze_injected_styles_upto` blocks are
// frozen. The mapping network is always frozen.
struct FreezePlan {
  int64_t trainable_block_count = 3;
  int64_t freeze_injected_styles_upto = 2;

  static FreezePlan from_config(const core::TrainConfig& cfg);
};

// Sets requires_grad per the plan and returns the trainable parameters.
std::vector<torch::Tensor> apply_freeze(StyleGenerator& g, const FreezePlan& plan);

struct FinetuneReport {
  int64_t step = 0;
  double d_loss = 0.0;
  double r1 = 0.0;
  double g_adv = 0.0;
  double global = 0.0;
  double patch = 0.0;
  double total = 0.0;

  nlohmann::ordered_json to_json() const;
};

// Semantic-constrained fine-tuning of a target generator initialized from a
// frozen source generator:
//   L = L_adv(G_t, D) + lambda_global L_global + lambda_patch L_patch
// with L_global / L_patch measured between G_s(w) and G_t(w) for fresh w.
// The discriminator uses the non-saturating logistic loss with an R1 penalty.
class StyleFinetuner {
 public:
  StyleFinetuner(StyleGenerator source, StyleGenerator target, StyleDiscriminator disc, const FreezePlan& plan,
                 const core::TrainConfig& cfg, std::shared_ptr<const priors::ImageEmbedder> embedder,
                 std::shared_ptr<const priors::PerceptualMetric> perceptual);

  // One D step then one G step. anime_batch is N x 3 x R x R.
  FinetuneReport step(const torch::Tensor& anime_batch, core::Rng& rng);

  StyleGenerator& source() { return source_; }
  StyleGenerator& target() { return target_; }
  StyleDiscriminator& discriminator() { return disc_; }
  const FreezePlan& plan() const { return plan_; }
  int64_t steps_done() const { return steps_; }

 private:
  torch::Tensor sample_w(int64_t n, core::Rng& rng);

  StyleGenerator source_;
  StyleGenerator target_;
  StyleDiscriminator disc_;
  FreezePlan plan_;
  core::TrainConfig cfg_;
  std::shared_ptr<const priors::ImageEmbedder> embedder_;
  std::shared_ptr<const priors::PerceptualMetric> perceptual_;
  std::unique_ptr<torch::optim::Adam> opt_g_;
  std::unique_ptr<torch::optim::Adam> opt_d_;
  int64_t steps_ = 0;
};

// A fresh source generator plus an identical target copy.
std::pair<StyleGenerator, StyleGenerator> make_generator_pair(const StyleGeneratorOptions& options, core::Rng& rng,
                                                              int64_t w_avg_samples);

// x_p = G_s(w), y_p = G_t(w) for the w derived from `seed`, truncated by psi.
core::PseudoPair sample_pair(StyleGenerator& g_s, StyleGenerator& g_t, int64_t seed, double psi);

// Writes n pairs with seeds first_seed .. first_seed+n-1 under the dataset
// layout in `out_dir`, plus a manifest listing every seed.
core::Manifest generate_pseudo_dataset(StyleGenerator& g_s, StyleGenerator& g_t, int64_t n, double psi,
                                       const std::filesystem::path& out_dir, int64_t first_seed = 0);

void save_generator(StyleGenerator& g, const std::filesystem::path& path);
StyleGenerator load_generator(const std::filesystem::path& path);
void save_discriminator(StyleDiscriminator& d, const StyleGeneratorOptions& options, const std::filesystem::path& path);
StyleDiscriminator load_discriminator(const std::filesystem::path& path);

}  // namespace scenepipe::adapt
