#include "scenepipe/losses/semantic.hpp"

#include "scenepipe/core/errors.hpp"
#include "scenepipe/losses/contrastive.hpp"

namespace scenepipe::losses {

torch::Tensor global_semantic_loss(const torch::Tensor& x_p, const torch::Tensor& y_p,
                                   const priors::ImageEmbedder& embedder, const priors::PerceptualMetric& perceptual,
                                   double lambda_lpips) {
  const torch::Tensor x = priors::as_batch(x_p);
  const torch::Tensor y = priors::as_batch(y_p);
  if (x.sizes() != y.sizes()) throw ShapeError("global_semantic_loss: image shapes differ");
  const torch::Tensor d_embed = priors::cosine_distance(embedder.embed(x), embedder.embed(y)).mean();
  if (lambda_lpips == 0.0) return d_embed;
  return d_embed + lambda_lpips * perceptual.distance(x, y);
}

std::vector<priors::PatchLocation> sample_patch_locations(int64_t height, int64_t width, int64_t k,
                                                          int64_t patch_size, core::Rng& rng) {
  if (patch_size < 1 || patch_size > height || patch_size > width) {
    throw BoundsError("patch of size " + std::to_string(patch_size) + " does not fit a " + std::to_string(height) +
                      "x" + std::to_string(width) + " image");
  }
  const int64_t rows = height - patch_size + 1;
  const int64_t cols = width - patch_size + 1;
  if (k < 0 || k > rows * cols) throw ArgumentError("cannot place " + std::to_string(k) + " distinct patches");
  const torch::Tensor order = rng.permutation(rows * cols).narrow(0, 0, k);
  auto acc = order.accessor<int64_t, 1>();
  std::vector<priors::PatchLocation> locs;
  locs.reserve(static_cast<size_t>(k));
  for (int64_t i = 0; i < k; ++i) locs.push_back({acc[i] / cols, acc[i] % cols});
  return locs;
}

torch::Tensor finetune_patch_loss(const torch::Tensor& x_p, const torch::Tensor& y_p,
                                  const priors::ImageEmbedder& embedder, int64_t k, int64_t patch_size,
                                  core::Rng& rng) {
  if (k < 2) throw ArgumentError("finetune_patch_loss needs k >= 2 so every query has a negative");
  const torch::Tensor x = priors::as_batch(x_p);
  const torch::Tensor y = priors::as_batch(y_p);
  if (x.sizes() != y.sizes()) throw ShapeError("finetune_patch_loss: image shapes differ");
  torch::Tensor total;
  for (int64_t b = 0; b < x.size(0); ++b) {
    const auto locs = sample_patch_locations(x.size(2), x.size(3), k, patch_size, rng);
    const torch::Tensor queries = embedder.embed_patches(y[b], locs, patch_size);
    const torch::Tensor keys = embedder.embed_patches(x[b], locs, patch_size);
    const torch::Tensor term = patch_nce(queries, keys, 1.0);
    total = total.defined() ? total + term : term;
  }
  return total / static_cast<double>(x.size(0));
}

}  // namespace scenepipe::losses
