#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "scenepipe/core/config.hpp"
#include "scenepipe/core/rng.hpp"

namespace scenepipe::adapt {

struct StyleGeneratorOptions {
  int64_t style_dim = 128;
  int64_t n_blocks = 5;
  int64_t mapping_layers = 4;
  int64_t channel_cap = 128;

  int64_t resolution() const { return int64_t{4} << (n_blocks - 1); }
  int64_t channels_at(int64_t block) const;

  static StyleGeneratorOptions from_config(const core::TrainConfig& cfg);
  nlohmann::json to_json() const;
  static StyleGeneratorOptions from_json(const nlohmann::json& j);
  bool operator==(const StyleGeneratorOptions&) const = default;
};

// A code in the intermediate (mapped) latent space plus the truncation to
// apply before synthesis.
struct LatentCode {
  torch::Tensor w;  // N x style_dim
  double truncation = 1.0;
};

// Equalized learning rate: weights are stored as N(0,1) and scaled by
// gain / sqrt(fan_in) at every forward pass.
class EqualLinearImpl : public torch::nn::Module {
 public:
  EqualLinearImpl(int64_t in_features, int64_t out_features, double gain = 1.0, double bias_init = 0.0);
  torch::Tensor forward(const torch::Tensor& x);
  void reset(core::Rng& rng);

  torch::Tensor weight;
  torch::Tensor bias;

 private:
  double scale_;
  double bias_init_;
};
TORCH_MODULE(EqualLinear);

class EqualConv2dImpl : public torch::nn::Module {
 public:
  EqualConv2dImpl(int64_t in_channels, int64_t out_channels, int64_t kernel, double gain = 1.0);
  torch::Tensor forward(const torch::Tensor& x);
  void reset(core::Rng& rng);

  torch::Tensor weight;
  torch::Tensor bias;

 private:
  double scale_;
  int64_t padding_;
};
TORCH_MODULE(EqualConv2d);

// Convolution whose weights are scaled per input channel by a style vector
// derived from w, optionally demodulated.
class ModulatedConvImpl : public torch::nn::Module {
 public:
  ModulatedConvImpl(int64_t in_channels, int64_t out_channels, int64_t kernel, int64_t style_dim, bool demodulate);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& w);

  EqualLinear affine{nullptr};
  torch::Tensor weight;
  torch::Tensor bias;

 private:
  int64_t in_channels_;
  int64_t out_channels_;
  int64_t kernel_;
  bool demodulate_;
};
TORCH_MODULE(ModulatedConv);

// One resolution level: (upsample) -> 2 modulated convs -> toRGB.
class SynthesisBlockImpl : public torch::nn::Module {
 public:
  SynthesisBlockImpl(int64_t in_channels, int64_t out_channels, int64_t style_dim, bool upsample);
  // Returns (features, rgb contribution at this resolution).
  std::pair<torch::Tensor, torch::Tensor> forward(torch::Tensor x, const torch::Tensor& w);

  ModulatedConv conv1{nullptr};
  ModulatedConv conv2{nullptr};
  ModulatedConv to_rgb{nullptr};

 private:
  bool upsample_;
};
TORCH_MODULE(SynthesisBlock);

class StyleGeneratorImpl : public torch::nn::Module {
 public:
  StyleGeneratorImpl(const StyleGeneratorOptions& options, core::Rng& rng);

  const StyleGeneratorOptions& options() const { return options_; }
  int64_t resolution() const { return options_.resolution(); }

  // z (N x style_dim) -> w
  torch::Tensor map(const torch::Tensor& z);
  // w' = w_avg + psi (w - w_avg)
  torch::Tensor truncate(const torch::Tensor& w, double psi) const;
  // w -> image in [-1,1], N x 3 x R x R (no truncation)
  torch::Tensor forward(const torch::Tensor& w);

  // Resets w_avg to the mean of `samples` mapped latents.
  void update_w_avg(core::Rng& rng, int64_t samples);
  const torch::Tensor& w_avg() const { return w_avg_; }

  // Convolution / toRGB parameters of block i (plus the constant input for
  // block 0), excluding the style affines.
  std::vector<torch::Tensor> block_parameters(int64_t block) const;
  // Style affine parameters injected into block i.
  std::vector<torch::Tensor> style_parameters(int64_t block) const;
  std::vector<torch::Tensor> mapping_parameters() const;

  torch::nn::Sequential mapping{nullptr};
  torch::nn::ModuleList blocks{nullptr};
  torch::Tensor const_input;

 private:
  StyleGeneratorOptions options_;
  torch::Tensor w_avg_;
};
TORCH_MODULE(StyleGenerator);

// Applies truncation then synthesizes. psi = 0 yields the mean image.
torch::Tensor synthesize(StyleGenerator& g, const LatentCode& code);

// Discriminator for the fine-tuning stage: fromRGB, conv/pool levels down to
// 4x4, then a 2-layer head producing one logit per image.
class StyleDiscriminatorImpl : public torch::nn::Module {
 public:
  StyleDiscriminatorImpl(const StyleGeneratorOptions& options, core::Rng& rng);
  torch::Tensor forward(const torch::Tensor& images);

 private:
  StyleGeneratorOptions options_;
  torch::nn::Sequential body{nullptr};
  torch::nn::Sequential head{nullptr};
};
TORCH_MODULE(StyleDiscriminator);

// Fills Linear / Conv2d weights with N(0, gain^2 / fan_in) and zero biases,
// drawing only from `rng`. Parameters are visited in registration order.
void init_standard(torch::nn::Module& module, core::Rng& rng, double gain = 1.0);

}  // namespace scenepipe::adapt
