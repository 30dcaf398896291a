#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace scenepipe::core {

// The complete hyperparameter record for all three stages. Loss weights,
// truncation, thresholds and patch counts keep their usual full-scale values;
// network widths default to a desk-scale setup (64x64 style generator).
struct TrainConfig {
  uint64_t seed = 0;
  int64_t resolution = 64;

  // stage 1: generator fine-tuning
  double lambda_lpips = 0.01;
  double lambda_global = 1.0;
  double lambda_patch = 0.05;
  int64_t finetune_iters = 1000;
  int64_t finetune_batch_size = 4;
  int64_t patch_count_finetune = 16;
  int64_t patch_size_finetune = 32;
  double finetune_lr = 2e-3;
  double finetune_beta1 = 0.0;
  double finetune_beta2 = 0.99;
  double r1_gamma = 10.0;
  int64_t style_dim = 128;
  int64_t style_blocks = 5;
  int64_t mapping_layers = 4;
  int64_t style_channel_cap = 128;
  int64_t trainable_blocks = 3;
  int64_t frozen_style_blocks = 2;
  int64_t w_avg_samples = 10000;

  // pseudo pairs
  double truncation = 0.7;
  int64_t n_pairs = 30000;
  int64_t first_pair_seed = 0;

  // stage 2: selection
  double bce_threshold = 5.0;

  // stage 3: translation
  double lambda_style = 0.05;
  double lambda_src = 0.05;
  double lambda_hdce = 0.1;
  double lambda_content = 0.0;
  double nce_temperature = 0.07;
  double hdce_beta = 1.0;
  int64_t epochs = 20;
  int64_t batch_size = 1;
  int64_t patches_per_layer = 256;
  std::vector<int64_t> feature_layer_ids = {0, 4, 8, 12, 16};
  int64_t embed_dim = 256;
  int64_t ngf = 64;
  int64_t ndf = 64;
  int64_t n_res_blocks = 9;
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  bool supervised = true;
  std::string sup_schedule = "cosine";  // cosine | constant | zero
  std::string style_variant = "stylepatchnce";  // stylepatchnce | l1

  // priors
  std::string embedder = "mock";
  std::string perceptual = "mock";
  std::string seg_provider = "mock";
  std::string fid_extractor = "mock";
  std::string embedder_weights;
  std::string perceptual_weights;
  std::string seg_weights;
  std::string extractor_weights;

  // Calls f(name, member) for every field, in declaration order.
  template <class Self, class F>
  static void visit(Self& cfg, F&& f) {
    f("seed", cfg.seed);
    f("resolution", cfg.resolution);
    f("lambda_lpips", cfg.lambda_lpips);
    f("lambda_global", cfg.lambda_global);
    f("lambda_patch", cfg.lambda_patch);
    f("finetune_iters", cfg.finetune_iters);
    f("finetune_batch_size", cfg.finetune_batch_size);
    f("patch_count_finetune", cfg.patch_count_finetune);
    f("patch_size_finetune", cfg.patch_size_finetune);
    f("finetune_lr", cfg.finetune_lr);
    f("finetune_beta1", cfg.finetune_beta1);
    f("finetune_beta2", cfg.finetune_beta2);
    f("r1_gamma", cfg.r1_gamma);
    f("style_dim", cfg.style_dim);
    f("style_blocks", cfg.style_blocks);
    f("mapping_layers", cfg.mapping_layers);
    f("style_channel_cap", cfg.style_channel_cap);
    f("trainable_blocks", cfg.trainable_blocks);
    f("frozen_style_blocks", cfg.frozen_style_blocks);
    f("w_avg_samples", cfg.w_avg_samples);
    f("truncation", cfg.truncation);
    f("n_pairs", cfg.n_pairs);
    f("first_pair_seed", cfg.first_pair_seed);
    f("bce_threshold", cfg.bce_threshold);
    f("lambda_style", cfg.lambda_style);
    f("lambda_src", cfg.lambda_src);
    f("lambda_hdce", cfg.lambda_hdce);
    f("lambda_content", cfg.lambda_content);
    f("nce_temperature", cfg.nce_temperature);
    f("hdce_beta", cfg.hdce_beta);
    f("epochs", cfg.epochs);
    f("batch_size", cfg.batch_size);
    f("patches_per_layer", cfg.patches_per_layer);
    f("feature_layer_ids", cfg.feature_layer_ids);
    f("embed_dim", cfg.embed_dim);
    f("ngf", cfg.ngf);
    f("ndf", cfg.ndf);
    f("n_res_blocks", cfg.n_res_blocks);
    f("lr", cfg.lr);
    f("beta1", cfg.beta1);
    f("beta2", cfg.beta2);
    f("supervised", cfg.supervised);
    f("sup_schedule", cfg.sup_schedule);
    f("style_variant", cfg.style_variant);
    f("embedder", cfg.embedder);
    f("perceptual", cfg.perceptual);
    f("seg_provider", cfg.seg_provider);
    f("fid_extractor", cfg.fid_extractor);
    f("embedder_weights", cfg.embedder_weights);
    f("perceptual_weights", cfg.perceptual_weights);
    f("seg_weights", cfg.seg_weights);
    f("extractor_weights", cfg.extractor_weights);
  }

  // Throws ConfigError on the first violated invariant.
  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

nlohmann::ordered_json to_json(const TrainConfig& cfg);
// Unknown keys are rejected; missing keys keep their current value in `base`.
TrainConfig from_json(const nlohmann::json& j, TrainConfig base = {});

std::string serialize_config(const TrainConfig& cfg);
TrainConfig parse_config(const std::string& text, TrainConfig base = {});
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {});
void save_config(const TrainConfig& cfg, const std::filesystem::path& path);

// Parses `text` into the named field (flag-override path). Lists are comma separated.
void set_config_field(TrainConfig& cfg, const std::string& name, const std::string& text);
std::vector<std::string> config_field_names();

}  // namespace scenepipe::core
