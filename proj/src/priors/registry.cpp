#include <filesystem>
#include <mutex>

#include <torch/script.h>

#include "scenepipe/core/errors.hpp"
#include "scenepipe/priors/priors.hpp"

namespace scenepipe::priors {

namespace {

// Wraps a frozen TorchScript module. jit::Module::forward is not const, and
// concurrent callers share one module, so calls go through a mutex.
class ScriptedModule {
 public:
  explicit ScriptedModule(const std::string& path) {
    if (path.empty()) throw PriorLoadError("torchscript provider needs a weights path");
    if (!std::filesystem::exists(path)) throw PriorLoadError("prior weights not found: '" + path + "'");
    try {
      module_ = torch::jit::load(path);
    } catch (const c10::Error& e) {
      throw PriorLoadError("cannot load scripted prior '" + path + "': " + e.what_without_backtrace());
    }
    module_.eval();
    for (auto p : module_.parameters()) p.set_requires_grad(false);
  }

  torch::Tensor call(std::vector<torch::jit::IValue> args) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto out = module_.forward(std::move(args));
    if (!out.isTensor()) throw PriorLoadError("scripted prior must return a tensor");
    return out.toTensor();
  }

 private:
  mutable torch::jit::Module module_;
  mutable std::mutex mutex_;
};

class ScriptedEmbedder final : public ImageEmbedder {
 public:
  explicit ScriptedEmbedder(const std::string& path) : module_(path) {
    dim_ = module_.call({torch::zeros({1, 3, 32, 32})}).size(-1);
  }
  std::string name() const override { return "torchscript"; }
  int64_t dim() const override { return dim_; }
  torch::Tensor embed(const torch::Tensor& images) const override { return module_.call({as_batch(images)}); }

 private:
  ScriptedModule module_;
  int64_t dim_ = 0;
};

class ScriptedPerceptual final : public PerceptualMetric {
 public:
  explicit ScriptedPerceptual(const std::string& path) : module_(path) {}
  std::string name() const override { return "torchscript"; }
  torch::Tensor distance(const torch::Tensor& a, const torch::Tensor& b) const override {
    const auto ba = as_batch(a);
    const auto bb = as_batch(b);
    if (ba.sizes() != bb.sizes()) throw ShapeError("perceptual_distance: image shapes differ");
    return module_.call({ba, bb}).mean();
  }

 private:
  ScriptedModule module_;
};

class ScriptedSegmenter final : public Segmenter {
 public:
  explicit ScriptedSegmenter(const std::string& path) : module_(path) {}
  std::string name() const override { return "torchscript"; }
  SegMap segment(const torch::Tensor& image) const override {
    torch::NoGradGuard no_grad;
    return SegMap::from_logits(module_.call({as_batch(image)}));
  }

 private:
  ScriptedModule module_;
};

class ScriptedExtractor final : public FeatureExtractor {
 public:
  explicit ScriptedExtractor(const std::string& path) : module_(path) {
    dim_ = module_.call({torch::zeros({1, 3, 64, 64})}).size(-1);
  }
  std::string name() const override { return "torchscript"; }
  int64_t dim() const override { return dim_; }
  torch::Tensor features(const torch::Tensor& images) const override { return module_.call({as_batch(images)}); }

 private:
  ScriptedModule module_;
  int64_t dim_ = 0;
};

[[noreturn]] void unknown(const char* kind, const std::string& provider) {
  throw PriorLoadError(std::string("unknown ") + kind + " provider '" + provider + "' (expected mock|torchscript)");
}

}  // namespace

std::shared_ptr<const ImageEmbedder> make_embedder(const std::string& provider, const std::string& weights) {
  if (provider == "mock") return std::make_shared<MockEmbedder>();
  if (provider == "torchscript") return std::make_shared<ScriptedEmbedder>(weights);
  unknown("embedder", provider);
}

std::shared_ptr<const PerceptualMetric> make_perceptual(const std::string& provider, const std::string& weights) {
  if (provider == "mock") return std::make_shared<MockPerceptual>();
  if (provider == "torchscript") return std::make_shared<ScriptedPerceptual>(weights);
  unknown("perceptual", provider);
}

std::shared_ptr<const Segmenter> make_segmenter(const std::string& provider, const std::string& weights) {
  if (provider == "mock") return std::make_shared<MockSegmenter>();
  if (provider == "torchscript") return std::make_shared<ScriptedSegmenter>(weights);
  unknown("segmenter", provider);
}

std::shared_ptr<const FeatureExtractor> make_feature_extractor(const std::string& provider,
                                                               const std::string& weights) {
  if (provider == "mock") return std::make_shared<MockFeatureExtractor>();
  if (provider == "torchscript") return std::make_shared<ScriptedExtractor>(weights);
  unknown("feature extractor", provider);
}

}  // namespace scenepipe::priors
