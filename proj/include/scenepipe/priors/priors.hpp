#pragma once

#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace scenepipe::priors {

// Adapters for the frozen pretrained priors. Images are always N x 3 x H x W
// (or 3 x H x W) tensors in [-1,1]; each adapter owns its own preprocessing.
// embed / distance / features are differentiable with respect to the input
// images; no adapter exposes trainable parameters.

struct PatchLocation {
  int64_t row = 0;
  int64_t col = 0;
  bool operator==(const PatchLocation&) const = default;
};

class ImageEmbedder {
 public:
  virtual ~ImageEmbedder() = default;
  virtual std::string name() const = 0;
  virtual int64_t dim() const = 0;
  // N x 3 x H x W -> N x dim
  virtual torch::Tensor embed(const torch::Tensor& images) const = 0;

  torch::Tensor embed_global(const torch::Tensor& image) const;
  // One row per location, in order. Crops are patch_size x patch_size with the
  // location as top-left corner; throws BoundsError if a crop leaves the image.
  torch::Tensor embed_patches(const torch::Tensor& image, const std::vector<PatchLocation>& locations,
                              int64_t patch_size) const;
};

class PerceptualMetric {
 public:
  virtual ~PerceptualMetric() = default;
  virtual std::string name() const = 0;
  // Scalar >= 0, averaged over the batch. Throws ShapeError on mismatch.
  virtual torch::Tensor distance(const torch::Tensor& a, const torch::Tensor& b) const = 0;
};

// Per-pixel class distribution over K classes plus its argmax.
struct SegMap {
  torch::Tensor probs;   // K x H x W, float64, each pixel sums to 1
  torch::Tensor labels;  // H x W, int64
  std::set<int64_t> categories;

  int64_t num_classes() const { return probs.size(0); }
  int64_t height() const { return probs.size(1); }
  int64_t width() const { return probs.size(2); }

  static SegMap from_logits(const torch::Tensor& logits);
  // Validates that every pixel sums to 1 within 1e-5.
  static SegMap from_probs(const torch::Tensor& probs);
};

class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual std::string name() const = 0;
  virtual SegMap segment(const torch::Tensor& image) const = 0;
};

class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::string name() const = 0;
  virtual int64_t dim() const = 0;
  // N x 3 x H x W -> N x dim
  virtual torch::Tensor features(const torch::Tensor& images) const = 0;
};

// Row-wise L2 normalization.
torch::Tensor normalize_rows(const torch::Tensor& v, double eps = 1e-12);
// 1 - cos(a, b) per row; result in [0, 2].
torch::Tensor cosine_distance(const torch::Tensor& a, const torch::Tensor& b);

// Promotes 3xHxW to 1x3xHxW and checks the channel count.
torch::Tensor as_batch(const torch::Tensor& image);

// -- deterministic mocks -----------------------------------------------------

// Channel means followed by a fixed random affine projection.
class MockEmbedder final : public ImageEmbedder {
 public:
  explicit MockEmbedder(int64_t dim = 64, uint64_t seed = 0x5eed0001);
  std::string name() const override { return "mock"; }
  int64_t dim() const override { return projection_.size(0); }
  torch::Tensor embed(const torch::Tensor& images) const override;

  const torch::Tensor& projection() const { return projection_; }  // dim x 3
  const torch::Tensor& bias() const { return bias_; }              // dim

 private:
  torch::Tensor projection_;
  torch::Tensor bias_;
};

// Mean squared difference of [1,2,1]/4-blurred images (separable, replicate padding).
class MockPerceptual final : public PerceptualMetric {
 public:
  std::string name() const override { return "mock"; }
  torch::Tensor distance(const torch::Tensor& a, const torch::Tensor& b) const override;
  static torch::Tensor blur(const torch::Tensor& images);
};

// Soft luminance binning into K classes with evenly spaced centers in [-1,1].
class MockSegmenter final : public Segmenter {
 public:
  explicit MockSegmenter(int64_t classes = 2, double sharpness = 8.0);
  std::string name() const override { return "mock"; }
  SegMap segment(const torch::Tensor& image) const override;

 private:
  int64_t classes_;
  double sharpness_;
};

// Adaptive 8x8 average pool followed by a fixed random linear map.
class MockFeatureExtractor final : public FeatureExtractor {
 public:
  explicit MockFeatureExtractor(int64_t dim = 32, uint64_t seed = 0x5eed0002);
  std::string name() const override { return "mock"; }
  int64_t dim() const override { return weight_.size(0); }
  torch::Tensor features(const torch::Tensor& images) const override;

 private:
  torch::Tensor weight_;
};

// -- registry ----------------------------------------------------------------

// Providers: "mock" (no files) and "torchscript" (a scripted module at
// `weights`). Unknown names or unreadable weights throw PriorLoadError.
std::shared_ptr<const ImageEmbedder> make_embedder(const std::string& provider, const std::string& weights = {});
std::shared_ptr<const PerceptualMetric> make_perceptual(const std::string& provider, const std::string& weights = {});
std::shared_ptr<const Segmenter> make_segmenter(const std::string& provider, const std::string& weights = {});
std::shared_ptr<const FeatureExtractor> make_feature_extractor(const std::string& provider,
                                                               const std::string& weights = {});

}  // namespace scenepipe::priors
