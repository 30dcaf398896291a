#pragma once

#include <vector>

#include <torch/torch.h>

#include "scenepipe/core/rng.hpp"
#include "scenepipe/priors/priors.hpp"

namespace scenepipe::losses {

// D_embed(x, y) + lambda_lpips * perceptual(x, y), averaged over the batch.
// D_embed is the cosine distance between global embeddings.
torch::Tensor global_semantic_loss(const torch::Tensor& x_p, const torch::Tensor& y_p,
                                   const priors::ImageEmbedder& embedder, const priors::PerceptualMetric& perceptual,
                                   double lambda_lpips);

// k distinct top-left corners for patch_size crops of an h x w image.
std::vector<priors::PatchLocation> sample_patch_locations(int64_t height, int64_t width, int64_t k,
                                                          int64_t patch_size, core::Rng& rng);

// Fine-tuning patch loss: k shared crop locations per image; each crop of y_p
// is a query whose positive is the x_p crop at the same location and whose
// negatives are the x_p crops at the other k-1 locations. Raw dot products of
// the embedder outputs, temperature 1. Mean over queries and batch.
torch::Tensor finetune_patch_loss(const torch::Tensor& x_p, const torch::Tensor& y_p,
                                  const priors::ImageEmbedder& embedder, int64_t k, int64_t patch_size,
                                  core::Rng& rng);

}  // namespace scenepipe::losses
