#include "scenepipe/priors/priors.hpp"

#include <cmath>

#include "scenepipe/core/errors.hpp"
#include "scenepipe/core/rng.hpp"

namespace scenepipe::priors {

namespace F = torch::nn::functional;

torch::Tensor as_batch(const torch::Tensor& image) {
  if (!image.defined()) throw ShapeError("undefined image tensor");
  torch::Tensor t = image.dim() == 3 ? image.unsqueeze(0) : image;
  if (t.dim() != 4) throw ShapeError("expected a 3xHxW or Nx3xHxW image tensor");
  if (t.size(1) != 3) throw ChannelError("expected 3 image channels, got " + std::to_string(t.size(1)));
  return t;
}

torch::Tensor normalize_rows(const torch::Tensor& v, double eps) {
  return v / v.norm(2, -1, true).clamp_min(eps);
}

torch::Tensor cosine_distance(const torch::Tensor& a, const torch::Tensor& b) {
  if (a.sizes() != b.sizes()) throw ShapeError("cosine_distance: embedding shapes differ");
  return 1.0 - (normalize_rows(a) * normalize_rows(b)).sum(-1);
}

torch::Tensor ImageEmbedder::embed_global(const torch::Tensor& image) const { return embed(as_batch(image)); }

torch::Tensor ImageEmbedder::embed_patches(const torch::Tensor& image, const std::vector<PatchLocation>& locations,
                                           int64_t patch_size) const {
  const torch::Tensor batch = as_batch(image);
  if (batch.size(0) != 1) throw ShapeError("embed_patches expects a single image");
  if (locations.empty()) return torch::empty({0, dim()}, batch.options());
  if (patch_size < 1) throw ArgumentError("patch_size must be positive");
  const int64_t h = batch.size(2);
  const int64_t w = batch.size(3);
  std::vector<torch::Tensor> crops;
  crops.reserve(locations.size());
  for (const auto& loc : locations) {
    if (loc.row < 0 || loc.col < 0 || loc.row + patch_size > h || loc.col + patch_size > w) {
      throw BoundsError("patch at (" + std::to_string(loc.row) + "," + std::to_string(loc.col) + ") of size " +
                        std::to_string(patch_size) + " does not fit a " + std::to_string(h) + "x" +
                        std::to_string(w) + " image");
    }
    crops.push_back(batch.narrow(2, loc.row, patch_size).narrow(3, loc.col, patch_size));
  }
  return embed(torch::cat(crops, 0));
}

SegMap SegMap::from_logits(const torch::Tensor& logits) {
  torch::Tensor l = logits.detach().to(torch::kFloat64);
  if (l.dim() == 4 && l.size(0) == 1) l = l.squeeze(0);
  if (l.dim() != 3 || l.size(0) < 1) throw ShapeError("segmentation logits must be K x H x W");
  return from_probs(torch::softmax(l, 0));
}

SegMap SegMap::from_probs(const torch::Tensor& probs) {
  torch::Tensor p = probs.detach().to(torch::kFloat64).contiguous();
  if (p.dim() != 3 || p.size(0) < 1) throw ShapeError("segmentation probabilities must be K x H x W");
  if (!torch::isfinite(p).all().item<bool>() || (p < 0).any().item<bool>()) {
    throw NumericError("segmentation probabilities must be finite and non-negative");
  }
  const double worst = (p.sum(0) - 1.0).abs().max().item<double>();
  if (worst > 1e-5) throw NumericError("segmentation probabilities do not sum to 1 (off by " + std::to_string(worst) + ")");
  SegMap seg;
  seg.probs = p;
  seg.labels = p.argmax(0);
  auto uniq = std::get<0>(torch::_unique(seg.labels.flatten(), true));
  auto acc = uniq.accessor<int64_t, 1>();
  for (int64_t i = 0; i < acc.size(0); ++i) seg.categories.insert(acc[i]);
  return seg;
}

MockEmbedder::MockEmbedder(int64_t dim, uint64_t seed) {
  if (dim < 1) throw ArgumentError("embedding dim must be positive");
  core::Rng rng(seed);
  projection_ = rng.normal({dim, 3}, 0.0, 1.0, torch::kFloat64);
  bias_ = rng.normal({dim}, 0.0, 0.5, torch::kFloat64);
}

torch::Tensor MockEmbedder::embed(const torch::Tensor& images) const {
  const torch::Tensor batch = as_batch(images);
  const torch::Tensor means = batch.mean({2, 3});  // N x 3
  const auto opts = batch.options();
  return torch::matmul(means, projection_.to(opts).t()) + bias_.to(opts);
}

torch::Tensor MockPerceptual::blur(const torch::Tensor& images) {
  const torch::Tensor batch = as_batch(images);
  const torch::Tensor padded = F::pad(batch, F::PadFuncOptions({1, 1, 1, 1}).mode(torch::kReplicate));
  const int64_t h = batch.size(2);
  const int64_t w = batch.size(3);
  const torch::Tensor rows =
      (padded.narrow(3, 0, w) + 2.0 * padded.narrow(3, 1, w) + padded.narrow(3, 2, w)) / 4.0;
  return (rows.narrow(2, 0, h) + 2.0 * rows.narrow(2, 1, h) + rows.narrow(2, 2, h)) / 4.0;
}

torch::Tensor MockPerceptual::distance(const torch::Tensor& a, const torch::Tensor& b) const {
  const torch::Tensor ba = as_batch(a);
  const torch::Tensor bb = as_batch(b);
  if (ba.sizes() != bb.sizes()) throw ShapeError("perceptual_distance: image shapes differ");
  return (blur(ba) - blur(bb)).pow(2).mean();
}

MockSegmenter::MockSegmenter(int64_t classes, double sharpness) : classes_(classes), sharpness_(sharpness) {
  if (classes < 2) throw ArgumentError("mock segmenter needs at least 2 classes");
}

SegMap MockSegmenter::segment(const torch::Tensor& image) const {
  const torch::Tensor batch = as_batch(image).detach().to(torch::kFloat64);
  if (batch.size(0) != 1) throw ShapeError("segment expects a single image");
  const torch::Tensor luma = 0.299 * batch[0][0] + 0.587 * batch[0][1] + 0.114 * batch[0][2];
  std::vector<torch::Tensor> logits;
  for (int64_t k = 0; k < classes_; ++k) {
    const double center = -1.0 + 2.0 * (static_cast<double>(k) + 0.5) / static_cast<double>(classes_);
    logits.push_back(-sharpness_ * (luma - center).pow(2));
  }
  return SegMap::from_logits(torch::stack(logits, 0));
}

MockFeatureExtractor::MockFeatureExtractor(int64_t dim, uint64_t seed) {
  if (dim < 1) throw ArgumentError("feature dim must be positive");
  core::Rng rng(seed);
  weight_ = rng.normal({dim, 3 * 8 * 8}, 0.0, 1.0 / std::sqrt(192.0), torch::kFloat64);
}

torch::Tensor MockFeatureExtractor::features(const torch::Tensor& images) const {
  const torch::Tensor batch = as_batch(images);
  const torch::Tensor pooled = F::adaptive_avg_pool2d(batch, F::AdaptiveAvgPool2dFuncOptions({8, 8}));
  return torch::matmul(pooled.flatten(1), weight_.to(batch.options()).t());
}

}  // namespace scenepipe::priors
