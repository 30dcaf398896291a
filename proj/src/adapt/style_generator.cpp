#include "scenepipe/adapt/style_generator.hpp"

#include <cmath>

#include "scenepipe/core/errors.hpp"

namespace scenepipe::adapt {

namespace F = torch::nn::functional;

namespace {

const double kSqrt2 = std::sqrt(2.0);

torch::Tensor lrelu(const torch::Tensor& x) {
  return F::leaky_relu(x, F::LeakyReLUFuncOptions().negative_slope(0.2)) * kSqrt2;
}

torch::Tensor upsample2x(const torch::Tensor& x) {
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .scale_factor(std::vector<double>{2.0, 2.0})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

torch::Tensor pixel_norm(const torch::Tensor& z) { return z * torch::rsqrt(z.pow(2).mean(1, true) + 1e-8); }

}  // namespace

int64_t StyleGeneratorOptions::channels_at(int64_t block) const {
  const int64_t res = int64_t{4} << block;
  return std::min(channel_cap, std::max<int64_t>(8, 2048 / res));
}

StyleGeneratorOptions StyleGeneratorOptions::from_config(const core::TrainConfig& cfg) {
  return {cfg.style_dim, cfg.style_blocks, cfg.mapping_layers, cfg.style_channel_cap};
}

nlohmann::json StyleGeneratorOptions::to_json() const {
  return {{"style_dim", style_dim}, {"n_blocks", n_blocks}, {"mapping_layers", mapping_layers}, {"channel_cap", channel_cap}};
}

StyleGeneratorOptions StyleGeneratorOptions::from_json(const nlohmann::json& j) {
  StyleGeneratorOptions o;
  o.style_dim = j.at("style_dim").get<int64_t>();
  o.n_blocks = j.at("n_blocks").get<int64_t>();
  o.mapping_layers = j.at("mapping_layers").get<int64_t>();
  o.channel_cap = j.at("channel_cap").get<int64_t>();
  return o;
}

void init_standard(torch::nn::Module& module, core::Rng& rng, double gain) {
  torch::NoGradGuard no_grad;
  // modules(true) needs a shared_ptr owner, which constructors do not have yet
  std::vector<torch::nn::Module*> all{&module};
  for (const auto& child : module.modules(/*include_self=*/false)) all.push_back(child.get());
  for (torch::nn::Module* m : all) {
    torch::Tensor weight;
    torch::Tensor bias;
    if (auto* lin = m->as<torch::nn::Linear>()) {
      weight = lin->weight;
      bias = lin->bias;
    } else if (auto* conv = m->as<torch::nn::Conv2d>()) {
      weight = conv->weight;
      bias = conv->bias;
    } else if (auto* deconv = m->as<torch::nn::ConvTranspose2d>()) {
      weight = deconv->weight;
      bias = deconv->bias;
    } else {
      continue;
    }
    const double fan_in = static_cast<double>(weight[0].numel());
    weight.copy_(rng.normal(weight.sizes(), 0.0, gain / std::sqrt(fan_in)));
    if (bias.defined()) bias.zero_();
  }
}

EqualLinearImpl::EqualLinearImpl(int64_t in_features, int64_t out_features, double gain, double bias_init)
    : scale_(gain / std::sqrt(static_cast<double>(in_features))), bias_init_(bias_init) {
  weight = register_parameter("weight", torch::zeros({out_features, in_features}));
  bias = register_parameter("bias", torch::full({out_features}, bias_init));
}

torch::Tensor EqualLinearImpl::forward(const torch::Tensor& x) { return F::linear(x, weight * scale_, bias); }

void EqualLinearImpl::reset(core::Rng& rng) {
  torch::NoGradGuard no_grad;
  weight.copy_(rng.normal(weight.sizes()));
  bias.fill_(bias_init_);
}

EqualConv2dImpl::EqualConv2dImpl(int64_t in_channels, int64_t out_channels, int64_t kernel, double gain)
    : scale_(gain / std::sqrt(static_cast<double>(in_channels * kernel * kernel))), padding_(kernel / 2) {
  weight = register_parameter("weight", torch::zeros({out_channels, in_channels, kernel, kernel}));
  bias = register_parameter("bias", torch::zeros({out_channels}));
}

torch::Tensor EqualConv2dImpl::forward(const torch::Tensor& x) {
  return F::conv2d(x, weight * scale_, F::Conv2dFuncOptions().padding(padding_).bias(bias));
}

void EqualConv2dImpl::reset(core::Rng& rng) {
  torch::NoGradGuard no_grad;
  weight.copy_(rng.normal(weight.sizes()));
  bias.zero_();
}

ModulatedConvImpl::ModulatedConvImpl(int64_t in_channels, int64_t out_channels, int64_t kernel, int64_t style_dim,
                                     bool demodulate)
    : in_channels_(in_channels), out_channels_(out_channels), kernel_(kernel), demodulate_(demodulate) {
  affine = register_module("affine", EqualLinear(style_dim, in_channels, 1.0, 1.0));
  weight = register_parameter("weight", torch::zeros({out_channels, in_channels, kernel, kernel}));
  bias = register_parameter("bias", torch::zeros({out_channels}));
}

torch::Tensor ModulatedConvImpl::forward(const torch::Tensor& x, const torch::Tensor& w) {
  const int64_t n = x.size(0);
  const int64_t h = x.size(2);
  const int64_t wd = x.size(3);
  const double scale = 1.0 / std::sqrt(static_cast<double>(in_channels_ * kernel_ * kernel_));
  const torch::Tensor style = affine(w);  // N x in
  torch::Tensor wt = weight.unsqueeze(0) * scale * style.view({n, 1, in_channels_, 1, 1});
  if (demodulate_) wt = wt * torch::rsqrt(wt.pow(2).sum({2, 3, 4}, true) + 1e-8);
  const torch::Tensor out = F::conv2d(x.reshape({1, n * in_channels_, h, wd}),
                                      wt.reshape({n * out_channels_, in_channels_, kernel_, kernel_}),
                                      F::Conv2dFuncOptions().padding(kernel_ / 2).groups(n));
  return out.view({n, out_channels_, h, wd}) + bias.view({1, out_channels_, 1, 1});
}

SynthesisBlockImpl::SynthesisBlockImpl(int64_t in_channels, int64_t out_channels, int64_t style_dim, bool upsample)
    : upsample_(upsample) {
  conv1 = register_module("conv1", ModulatedConv(in_channels, out_channels, 3, style_dim, true));
  conv2 = register_module("conv2", ModulatedConv(out_channels, out_channels, 3, style_dim, true));
  to_rgb = register_module("to_rgb", ModulatedConv(out_channels, 3, 1, style_dim, false));
}

std::pair<torch::Tensor, torch::Tensor> SynthesisBlockImpl::forward(torch::Tensor x, const torch::Tensor& w) {
  if (upsample_) x = upsample2x(x);
  x = lrelu(conv1(x, w));
  x = lrelu(conv2(x, w));
  return {x, to_rgb(x, w)};
}

StyleGeneratorImpl::StyleGeneratorImpl(const StyleGeneratorOptions& options, core::Rng& rng) : options_(options) {
  if (options.n_blocks < 1 || options.style_dim < 1 || options.mapping_layers < 1 || options.channel_cap < 1) {
    throw ConfigError("invalid style generator options");
  }
  mapping = register_module("mapping", torch::nn::Sequential());
  for (int64_t i = 0; i < options.mapping_layers; ++i) {
    mapping->push_back(torch::nn::Linear(options.style_dim, options.style_dim));
    mapping->push_back(torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)));
  }
  blocks = register_module("blocks", torch::nn::ModuleList());
  for (int64_t b = 0; b < options.n_blocks; ++b) {
    const int64_t in = options.channels_at(b == 0 ? 0 : b - 1);
    blocks->push_back(SynthesisBlock(in, options.channels_at(b), options.style_dim, b > 0));
  }
  const_input = register_parameter("const_input", torch::zeros({1, options.channels_at(0), 4, 4}));
  w_avg_ = register_buffer("w_avg", torch::zeros({options.style_dim}));

  torch::NoGradGuard no_grad;
  init_standard(*mapping, rng, kSqrt2);
  const_input.copy_(rng.normal(const_input.sizes()));
  for (const auto& m : blocks->modules(false)) {
    if (auto* conv = m->as<ModulatedConv>()) {
      conv->weight.copy_(rng.normal(conv->weight.sizes()));
      conv->affine->reset(rng);
    }
  }
}

torch::Tensor StyleGeneratorImpl::map(const torch::Tensor& z) {
  if (z.dim() != 2 || z.size(1) != options_.style_dim) {
    throw ShapeError("latent must be N x " + std::to_string(options_.style_dim));
  }
  return mapping->forward(pixel_norm(z));
}

torch::Tensor StyleGeneratorImpl::truncate(const torch::Tensor& w, double psi) const {
  if (psi == 1.0) return w;
  return w_avg_.to(w.dtype()).unsqueeze(0) + psi * (w - w_avg_.to(w.dtype()).unsqueeze(0));
}

torch::Tensor StyleGeneratorImpl::forward(const torch::Tensor& w) {
  if (w.dim() != 2 || w.size(1) != options_.style_dim) {
    throw ShapeError("style code must be N x " + std::to_string(options_.style_dim));
  }
  torch::Tensor x = const_input.expand({w.size(0), -1, -1, -1});
  torch::Tensor rgb;
  for (const auto& m : *blocks) {
    auto [feat, contribution] = m->as<SynthesisBlock>()->forward(x, w);
    x = feat;
    rgb = rgb.defined() ? upsample2x(rgb) + contribution : contribution;
  }
  return torch::tanh(rgb);
}

void StyleGeneratorImpl::update_w_avg(core::Rng& rng, int64_t samples) {
  if (samples < 1) throw ArgumentError("w_avg needs at least one sample");
  torch::NoGradGuard no_grad;
  torch::Tensor sum = torch::zeros({options_.style_dim}, torch::kFloat64);
  for (int64_t done = 0; done < samples;) {
    const int64_t chunk = std::min<int64_t>(1000, samples - done);
    sum += map(rng.normal({chunk, options_.style_dim})).to(torch::kFloat64).sum(0);
    done += chunk;
  }
  w_avg_.copy_((sum / static_cast<double>(samples)).to(torch::kFloat32));
}

std::vector<torch::Tensor> StyleGeneratorImpl::block_parameters(int64_t block) const {
  if (block < 0 || block >= options_.n_blocks) throw ArgumentError("block index out of range");
  const auto* b = blocks->ptr(static_cast<size_t>(block))->as<SynthesisBlock>();
  std::vector<torch::Tensor> out;
  if (block == 0) out.push_back(const_input);
  for (const ModulatedConv& c : {b->conv1, b->conv2, b->to_rgb}) {
    out.push_back(c->weight);
    out.push_back(c->bias);
  }
  return out;
}

std::vector<torch::Tensor> StyleGeneratorImpl::style_parameters(int64_t block) const {
  if (block < 0 || block >= options_.n_blocks) throw ArgumentError("block index out of range");
  const auto* b = blocks->ptr(static_cast<size_t>(block))->as<SynthesisBlock>();
  std::vector<torch::Tensor> out;
  for (const ModulatedConv& c : {b->conv1, b->conv2, b->to_rgb}) {
    out.push_back(c->affine->weight);
    out.push_back(c->affine->bias);
  }
  return out;
}

std::vector<torch::Tensor> StyleGeneratorImpl::mapping_parameters() const { return mapping->parameters(); }

torch::Tensor synthesize(StyleGenerator& g, const LatentCode& code) {
  if (!(code.truncation >= 0.0 && code.truncation <= 1.0)) throw ArgumentError("truncation must lie in [0,1]");
  return g->forward(g->truncate(code.w, code.truncation));
}

StyleDiscriminatorImpl::StyleDiscriminatorImpl(const StyleGeneratorOptions& options, core::Rng& rng)
    : options_(options) {
  using namespace torch::nn;
  const auto act = [] { return LeakyReLU(LeakyReLUOptions().negative_slope(0.2)); };
  body = register_module("body", Sequential());
  const int64_t top = options.n_blocks - 1;
  body->push_back(EqualConv2d(3, options.channels_at(top), 1, kSqrt2));
  body->push_back(act());
  for (int64_t b = top; b >= 1; --b) {
    const int64_t c = options.channels_at(b);
    body->push_back(EqualConv2d(c, c, 3, kSqrt2));
    body->push_back(act());
    body->push_back(EqualConv2d(c, options.channels_at(b - 1), 3, kSqrt2));
    body->push_back(act());
    body->push_back(AvgPool2d(AvgPool2dOptions(2)));
  }
  const int64_t c0 = options.channels_at(0);
  head = register_module("head", Sequential(Flatten(), EqualLinear(c0 * 16, c0, kSqrt2), act(), EqualLinear(c0, 1)));
  for (const auto& m : modules(false)) {
    if (auto* conv = m->as<EqualConv2d>()) conv->reset(rng);
    if (auto* lin = m->as<EqualLinear>()) lin->reset(rng);
  }
}

torch::Tensor StyleDiscriminatorImpl::forward(const torch::Tensor& images) {
  const int64_t res = options_.resolution();
  if (images.dim() != 4 || images.size(1) != 3 || images.size(2) != res || images.size(3) != res) {
    throw ShapeError("discriminator expects N x 3 x " + std::to_string(res) + " x " + std::to_string(res));
  }
  return head->forward(body->forward(images)).view({-1});
}

}  // namespace scenepipe::adapt
