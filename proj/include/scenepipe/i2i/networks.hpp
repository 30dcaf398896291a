#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "scenepipe/core/config.hpp"
#include "scenepipe/core/image.hpp"
#include "scenepipe/core/rng.hpp"
#include "scenepipe/losses/contrastive.hpp"

namespace scenepipe::i2i {

struct TranslatorOptions {
  int64_t ngf = 64;
  int64_t ndf = 64;
  int64_t n_res_blocks = 9;
  int64_t embed_dim = 256;
  std::vector<int64_t> layer_ids = {0, 4, 8, 12, 16};

  static TranslatorOptions from_config(const core::TrainConfig& cfg);
  nlohmann::json to_json() const;
  static TranslatorOptions from_json(const nlohmann::json& j);
};

// Fixed [1,2,1] x [1,2,1] / 16 blur followed by stride-2 subsampling.
class BlurDownsampleImpl : public torch::nn::Module {
 public:
  explicit BlurDownsampleImpl(int64_t channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  int64_t channels_;
  torch::Tensor kernel_;
};
TORCH_MODULE(BlurDownsample);

class ResnetBlockImpl : public torch::nn::Module {
 public:
  explicit ResnetBlockImpl(int64_t channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Sequential body{nullptr};
};
TORCH_MODULE(ResnetBlock);

// ResNet encoder/decoder translator. Flat layer indices:
//   0 pad, 1-3 stem conv/norm/relu,
//   4-7 first downsampling (conv, norm, relu, blur-stride-2),
//   8-11 second downsampling,
//   12.. residual blocks, then 2 upsampling blocks and the tanh head.
// The encoder is everything up to and including the first ceil(n/2)
// residual blocks; taps 0/4/8/12/16 are the padded input, the two
// downsampling convs and residual blocks 1 and 5.
class TranslationGeneratorImpl : public torch::nn::Module {
 public:
  TranslationGeneratorImpl(const TranslatorOptions& options, core::Rng& rng);

  torch::Tensor forward(const torch::Tensor& x);
  torch::Tensor encode(const torch::Tensor& x);
  torch::Tensor decode(const torch::Tensor& h);
  // Outputs of the requested layers (ascending ids), stopping after the last.
  std::vector<torch::Tensor> taps(const torch::Tensor& x, const std::vector<int64_t>& layer_ids);

  int64_t layer_count() const { return static_cast<int64_t>(model->size()); }
  int64_t encoder_layer_count() const { return encoder_layers_; }
  const TranslatorOptions& options() const { return options_; }

  torch::nn::Sequential model{nullptr};

 private:
  TranslatorOptions options_;
  int64_t encoder_layers_ = 0;
};
TORCH_MODULE(TranslationGenerator);

// One two-layer MLP per tapped layer: channels -> embed_dim -> embed_dim.
class ProjectionHeadsImpl : public torch::nn::Module {
 public:
  ProjectionHeadsImpl(const std::vector<int64_t>& in_channels, int64_t embed_dim, core::Rng& rng);
  torch::Tensor forward(size_t layer, const torch::Tensor& features);
  size_t size() const { return mlps->size(); }

  torch::nn::ModuleList mlps{nullptr};
};
TORCH_MODULE(ProjectionHeads);

// 70x70 PatchGAN: three stride-2 4x4 convs, one stride-1 conv, 1-channel head.
class PatchDiscriminatorImpl : public torch::nn::Module {
 public:
  PatchDiscriminatorImpl(int64_t in_channels, int64_t ndf, core::Rng& rng);
  torch::Tensor forward(const torch::Tensor& x);
  int64_t in_channels() const { return in_channels_; }

 private:
  int64_t in_channels_;
  torch::nn::Sequential model{nullptr};
};
TORCH_MODULE(PatchDiscriminator);

// Channel count of every tapped layer.
std::vector<int64_t> tap_channels(TranslationGenerator& g, const std::vector<int64_t>& layer_ids);

// Weights ~ N(0, std^2), biases zero, for every conv / linear in `module`.
void init_normal(torch::nn::Module& module, core::Rng& rng, double stddev = 0.02);

// Inference on one image; height and width must be divisible by 4.
core::ImageTensor translate(TranslationGenerator& g, const core::ImageTensor& x);

// Samples n spatial positions per tapped layer (or reuses the locations in
// `reuse`), projects them through the heads and records the locations.
losses::PatchFeatureSet extract_patch_features(TranslationGenerator& g, ProjectionHeads& heads,
                                               const torch::Tensor& img, int64_t n_per_layer, core::Rng& rng,
                                               const losses::PatchFeatureSet* reuse = nullptr);

}  // namespace scenepipe::i2i
