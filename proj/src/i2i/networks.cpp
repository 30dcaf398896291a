#include "scenepipe/i2i/networks.hpp"

#include <algorithm>

#include "scenepipe/core/errors.hpp"

namespace scenepipe::i2i {

namespace F = torch::nn::functional;
using namespace torch::nn;

namespace {

InstanceNorm2d instance_norm(int64_t c) { return InstanceNorm2d(InstanceNorm2dOptions(c).affine(false)); }

}  // namespace

TranslatorOptions TranslatorOptions::from_config(const core::TrainConfig& cfg) {
  return {cfg.ngf, cfg.ndf, cfg.n_res_blocks, cfg.embed_dim, cfg.feature_layer_ids};
}

nlohmann::json TranslatorOptions::to_json() const {
  return {{"ngf", ngf}, {"ndf", ndf}, {"n_res_blocks", n_res_blocks}, {"embed_dim", embed_dim}, {"layer_ids", layer_ids}};
}

TranslatorOptions TranslatorOptions::from_json(const nlohmann::json& j) {
  TranslatorOptions o;
  o.ngf = j.at("ngf").get<int64_t>();
  o.ndf = j.at("ndf").get<int64_t>();
  o.n_res_blocks = j.at("n_res_blocks").get<int64_t>();
  o.embed_dim = j.at("embed_dim").get<int64_t>();
  o.layer_ids = j.at("layer_ids").get<std::vector<int64_t>>();
  return o;
}

void init_normal(Module& module, core::Rng& rng, double stddev) {
  torch::NoGradGuard no_grad;
  // modules(true) needs a shared_ptr owner, which constructors do not have yet
  std::vector<Module*> all{&module};
  for (const auto& child : module.modules(/*include_self=*/false)) all.push_back(child.get());
  for (Module* m : all) {
    torch::Tensor weight;
    torch::Tensor bias;
    if (auto* conv = m->as<Conv2d>()) {
      weight = conv->weight;
      bias = conv->bias;
    } else if (auto* deconv = m->as<ConvTranspose2d>()) {
      weight = deconv->weight;
      bias = deconv->bias;
    } else if (auto* lin = m->as<Linear>()) {
      weight = lin->weight;
      bias = lin->bias;
    } else {
      continue;
    }
    weight.copy_(rng.normal(weight.sizes(), 0.0, stddev));
    if (bias.defined()) bias.zero_();
  }
}

BlurDownsampleImpl::BlurDownsampleImpl(int64_t channels) : channels_(channels) {
  const auto taps = torch::tensor({1.0f, 2.0f, 1.0f});
  const auto k2 = torch::outer(taps, taps) / 16.0;
  kernel_ = register_buffer("kernel", k2.view({1, 1, 3, 3}).repeat({channels, 1, 1, 1}));
}

torch::Tensor BlurDownsampleImpl::forward(const torch::Tensor& x) {
  const auto padded = F::pad(x, F::PadFuncOptions({1, 1, 1, 1}).mode(torch::kReflect));
  return F::conv2d(padded, kernel_.to(x.dtype()), F::Conv2dFuncOptions().stride(2).groups(channels_));
}

ResnetBlockImpl::ResnetBlockImpl(int64_t c) {
  body = register_module("body", Sequential(ReflectionPad2d(1), Conv2d(Conv2dOptions(c, c, 3)), instance_norm(c),
                                            ReLU(), ReflectionPad2d(1), Conv2d(Conv2dOptions(c, c, 3)),
                                            instance_norm(c)));
}

torch::Tensor ResnetBlockImpl::forward(const torch::Tensor& x) { return x + body->forward(x); }

TranslationGeneratorImpl::TranslationGeneratorImpl(const TranslatorOptions& options, core::Rng& rng)
    : options_(options) {
  if (options.ngf < 1 || options.n_res_blocks < 1 || options.embed_dim < 1) {
    throw ConfigError("invalid translation generator options");
  }
  const int64_t ngf = options.ngf;
  model = register_module("model", Sequential());
  model->push_back(ReflectionPad2d(3));
  model->push_back(Conv2d(Conv2dOptions(3, ngf, 7)));
  model->push_back(instance_norm(ngf));
  model->push_back(ReLU());
  int64_t c = ngf;
  for (int i = 0; i < 2; ++i) {
    model->push_back(Conv2d(Conv2dOptions(c, c * 2, 3).padding(1)));
    model->push_back(instance_norm(c * 2));
    model->push_back(ReLU());
    model->push_back(BlurDownsample(c * 2));
    c *= 2;
  }
  for (int64_t r = 0; r < options.n_res_blocks; ++r) {
    model->push_back(ResnetBlock(c));
    if (r + 1 == (options.n_res_blocks + 1) / 2) encoder_layers_ = static_cast<int64_t>(model->size());
  }
  for (int i = 0; i < 2; ++i) {
    model->push_back(ConvTranspose2d(ConvTranspose2dOptions(c, c / 2, 3).stride(2).padding(1).output_padding(1)));
    model->push_back(instance_norm(c / 2));
    model->push_back(ReLU());
    c /= 2;
  }
  model->push_back(ReflectionPad2d(3));
  model->push_back(Conv2d(Conv2dOptions(c, 3, 7)));
  model->push_back(Tanh());

  for (auto id : options.layer_ids) {
    if (id < 0 || id >= layer_count()) throw ConfigError("feature layer id " + std::to_string(id) + " out of range");
  }
  init_normal(*this, rng);
}

torch::Tensor TranslationGeneratorImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != 3) throw ShapeError("translator expects N x 3 x H x W");
  if (x.size(2) % 4 != 0 || x.size(3) % 4 != 0) {
    throw ShapeError("translator input height and width must be divisible by 4, got " + std::to_string(x.size(2)) +
                     "x" + std::to_string(x.size(3)));
  }
  return model->forward(x);
}

torch::Tensor TranslationGeneratorImpl::encode(const torch::Tensor& x) {
  torch::Tensor h = x;
  auto it = model->begin();
  for (int64_t i = 0; i < encoder_layers_; ++i, ++it) h = it->forward(h);
  return h;
}

torch::Tensor TranslationGeneratorImpl::decode(const torch::Tensor& h) {
  torch::Tensor y = h;
  auto it = model->begin() + encoder_layers_;
  for (; it != model->end(); ++it) y = it->forward(y);
  return y;
}

std::vector<torch::Tensor> TranslationGeneratorImpl::taps(const torch::Tensor& x, const std::vector<int64_t>& layer_ids) {
  if (layer_ids.empty()) return {};
  if (!std::is_sorted(layer_ids.begin(), layer_ids.end())) throw ArgumentError("tap layer ids must be ascending");
  if (layer_ids.back() >= layer_count()) throw ArgumentError("tap layer id out of range");
  if (x.dim() != 4 || x.size(1) != 3) throw ShapeError("translator expects N x 3 x H x W");
  std::vector<torch::Tensor> out;
  torch::Tensor h = x;
  size_t next = 0;
  int64_t index = 0;
  for (auto it = model->begin(); it != model->end() && next < layer_ids.size(); ++it, ++index) {
    h = it->forward(h);
    while (next < layer_ids.size() && layer_ids[next] == index) {
      out.push_back(h);
      ++next;
    }
  }
  return out;
}

ProjectionHeadsImpl::ProjectionHeadsImpl(const std::vector<int64_t>& in_channels, int64_t embed_dim, core::Rng& rng) {
  mlps = register_module("mlps", ModuleList());
  for (int64_t c : in_channels) {
    mlps->push_back(Sequential(Linear(c, embed_dim), ReLU(), Linear(embed_dim, embed_dim)));
  }
  init_normal(*this, rng);
}

torch::Tensor ProjectionHeadsImpl::forward(size_t layer, const torch::Tensor& features) {
  if (layer >= mlps->size()) throw ArgumentError("no projection head for layer slot " + std::to_string(layer));
  return mlps->ptr<SequentialImpl>(layer)->forward(features);
}

PatchDiscriminatorImpl::PatchDiscriminatorImpl(int64_t in_channels, int64_t ndf, core::Rng& rng)
    : in_channels_(in_channels) {
  const auto act = [] { return LeakyReLU(LeakyReLUOptions().negative_slope(0.2)); };
  model = register_module("model", Sequential());
  model->push_back(Conv2d(Conv2dOptions(in_channels, ndf, 4).stride(2).padding(1)));
  model->push_back(act());
  int64_t c = ndf;
  for (int i = 0; i < 2; ++i) {
    model->push_back(Conv2d(Conv2dOptions(c, c * 2, 4).stride(2).padding(1)));
    model->push_back(instance_norm(c * 2));
    model->push_back(act());
    c *= 2;
  }
  model->push_back(Conv2d(Conv2dOptions(c, c * 2, 4).stride(1).padding(1)));
  model->push_back(instance_norm(c * 2));
  model->push_back(act());
  model->push_back(Conv2d(Conv2dOptions(c * 2, 1, 4).stride(1).padding(1)));
  init_normal(*this, rng);
}

torch::Tensor PatchDiscriminatorImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != in_channels_) {
    throw ShapeError("patch discriminator expects " + std::to_string(in_channels_) + " input channels");
  }
  return model->forward(x);
}

std::vector<int64_t> tap_channels(TranslationGenerator& g, const std::vector<int64_t>& layer_ids) {
  torch::NoGradGuard no_grad;
  std::vector<int64_t> out;
  for (const auto& t : g->taps(torch::zeros({1, 3, 16, 16}), layer_ids)) out.push_back(t.size(1));
  return out;
}

core::ImageTensor translate(TranslationGenerator& g, const core::ImageTensor& x) {
  if (x.height() % 4 != 0 || x.width() % 4 != 0) {
    throw ShapeError("translate: resolution " + std::to_string(x.height()) + "x" + std::to_string(x.width()) +
                     " is not divisible by 4");
  }
  torch::NoGradGuard no_grad;
  return core::ImageTensor::from_tensor(g->forward(x.batched()));
}

losses::PatchFeatureSet extract_patch_features(TranslationGenerator& g, ProjectionHeads& heads,
                                               const torch::Tensor& img, int64_t n_per_layer, core::Rng& rng,
                                               const losses::PatchFeatureSet* reuse) {
  const auto& ids = g->options().layer_ids;
  if (heads->size() != ids.size()) throw ConfigError("projection heads do not match the tapped layers");
  if (reuse != nullptr && reuse->layers.size() != ids.size()) {
    throw AlignmentError("reused locations cover " + std::to_string(reuse->layers.size()) + " layers, expected " +
                         std::to_string(ids.size()));
  }
  const auto feats = g->taps(img.dim() == 3 ? img.unsqueeze(0) : img, ids);
  losses::PatchFeatureSet out;
  for (size_t l = 0; l < ids.size(); ++l) {
    const torch::Tensor flat = feats[l].permute({0, 2, 3, 1}).flatten(1, 2);  // N x HW x C
    const int64_t positions = flat.size(1);
    torch::Tensor locations;
    if (reuse != nullptr) {
      const auto& src = reuse->layers[l];
      if (src.layer_id != ids[l]) throw AlignmentError("reused locations belong to a different layer");
      locations = src.locations;
      if (locations.numel() > 0 && locations.max().item<int64_t>() >= positions) {
        throw AlignmentError("reused locations exceed layer " + std::to_string(ids[l]) + "'s spatial extent");
      }
    } else {
      if (n_per_layer < 1 || n_per_layer > positions) {
        throw ArgumentError("cannot sample " + std::to_string(n_per_layer) + " patches from layer " +
                            std::to_string(ids[l]) + " with " + std::to_string(positions) + " positions");
      }
      locations = rng.permutation(positions).narrow(0, 0, n_per_layer).clone();
    }
    const torch::Tensor sampled = flat.index_select(1, locations).flatten(0, 1);
    out.layers.push_back({ids[l], heads->forward(l, sampled), locations});
  }
  return out;
}

}  // namespace scenepipe::i2i
