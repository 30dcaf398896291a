#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "scenepipe/core/config.hpp"
#include "scenepipe/core/dataset.hpp"
#include "scenepipe/i2i/networks.hpp"
#include "scenepipe/losses/contrastive.hpp"
#include "scenepipe/priors/priors.hpp"

namespace scenepipe::i2i {

// Weight of the supervised branch at epoch t (1-based):
//   lambda_sup(t) = cos(pi / (2 T) * (t - 1)),  T = horizon.
// Training uses T = max(20, epochs) so the weight stays positive on longer runs.
struct EpochSchedule {
  int64_t horizon = 20;
  std::string kind = "cosine";  // cosine | constant | zero

  double lambda_sup(int64_t t) const;
};

struct LossTerm {
  std::string name;
  double weight = 1.0;
  double value = 0.0;
};

// A differentiable total plus the per-term values that produced it.
struct LossReport {
  torch::Tensor total;
  std::vector<LossTerm> terms;
  // Feature sets used by the contrastive terms (query side, key side).
  losses::PatchFeatureSet query_feats;
  losses::PatchFeatureSet key_feats;

  double term(const std::string& name) const;
  double weighted_sum() const;
};

// L_sup = L_cGAN(G, D_P) + lambda_style * L_StylePatchNCE (or mean |G(x_p) - y_p|
// for the l1 variant). `fake_p` is G(x_p).
LossReport supervised_branch_loss(TranslationGenerator& g, ProjectionHeads& heads, PatchDiscriminator& d_p,
                                  const torch::Tensor& x_p, const torch::Tensor& y_p, const torch::Tensor& fake_p,
                                  const core::TrainConfig& cfg, core::Rng& rng);
LossReport supervised_branch_loss(TranslationGenerator& g, ProjectionHeads& heads, PatchDiscriminator& d_p,
                                  const core::PseudoPair& pair, const core::TrainConfig& cfg, core::Rng& rng);

// L_unsup = L_GAN(G, D_U) + lambda_SRC L_SRC + lambda_hDCE L_hDCE
//           [+ lambda_content * perceptual(x, G(x))]. `fake` is G(x).
LossReport unsupervised_branch_loss(TranslationGenerator& g, ProjectionHeads& heads, PatchDiscriminator& d_u,
                                    const torch::Tensor& x, const torch::Tensor& fake, const core::TrainConfig& cfg,
                                    core::Rng& rng, const priors::PerceptualMetric* perceptual = nullptr);
LossReport unsupervised_branch_loss(TranslationGenerator& g, ProjectionHeads& heads, PatchDiscriminator& d_u,
                                    const core::ImageTensor& x, const core::ImageTensor& y,
                                    const core::TrainConfig& cfg, core::Rng& rng,
                                    const priors::PerceptualMetric* perceptual = nullptr);

struct TrainingData {
  std::vector<core::ImageTensor> real;
  std::vector<core::ImageTensor> anime;
  std::vector<core::PseudoPair> pairs;
};

// Everything that evolves during translation training.
class TrainState {
 public:
  explicit TrainState(const core::TrainConfig& cfg);

  core::TrainConfig cfg;
  TranslatorOptions options;
  TranslationGenerator g{nullptr};
  ProjectionHeads heads{nullptr};
  PatchDiscriminator d_u{nullptr};
  PatchDiscriminator d_p{nullptr};
  std::unique_ptr<torch::optim::Adam> opt_g;
  std::unique_ptr<torch::optim::Adam> opt_du;
  std::unique_ptr<torch::optim::Adam> opt_dp;
  int64_t epochs_done = 0;
};

using MetricsSink = std::function<void(const nlohmann::ordered_json&)>;

struct EpochMetrics {
  int64_t epoch = 0;
  int64_t iterations = 0;
  double lambda_sup = 0.0;
  // Mean of every logged quantity over the epoch, in first-seen order.
  nlohmann::ordered_json means;
};

// One pass with batch size 1. Each iteration translates x and x_p, steps D_U
// and D_P on detached fakes, then takes one joint G + heads step on
// L_unsup + lambda_sup(t) L_sup. Iteration count = max(|real|, |anime|).
EpochMetrics train_epoch(TrainState& state, const TrainingData& data, int64_t t,
                         const priors::PerceptualMetric* perceptual = nullptr, const MetricsSink& sink = {});

void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);
// Generator only, for inference.
TranslationGenerator load_translator(const std::filesystem::path& path);

}  // namespace scenepipe::i2i
