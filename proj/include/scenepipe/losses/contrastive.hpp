#pragma once

#include <cstdint>
#include <vector>

#include <torch/torch.h>

namespace scenepipe::losses {

// Embedded patch features of one tapped layer. Row r of `features` was taken
// at flat spatial index `locations[r]` of that layer's feature map.
struct LayerPatches {
  int64_t layer_id = 0;
  torch::Tensor features;   // n x d
  torch::Tensor locations;  // n, int64, distinct
};

struct PatchFeatureSet {
  std::vector<LayerPatches> layers;

  // True iff layer ids and sampled locations match exactly, so that row i of
  // one set is the positive for row i of the other.
  bool aligned_with(const PatchFeatureSet& other) const;
};

// -log( e^{q.p/t} / (e^{q.p/t} + sum_i e^{q.n_i/t}) ) for one query.
torch::Tensor info_nce(const torch::Tensor& query, const torch::Tensor& positive, const torch::Tensor& negatives,
                       double temperature);

// Row-wise InfoNCE where key i is the positive for query i and every other key
// is a negative; averaged over queries. Inputs are used as given (no
// normalization).
torch::Tensor patch_nce(const torch::Tensor& queries, const torch::Tensor& keys, double temperature);

// StylePatchNCE: queries from the translated image, keys from the pseudo
// ground truth. Features are L2-normalized; mean over patches, sum over layers.
torch::Tensor style_patch_nce(const PatchFeatureSet& gen_feats, const PatchFeatureSet& target_feats,
                              double temperature);

// Row-wise Jensen-Shannon divergence (natural log) between two stochastic
// matrices with strictly positive entries. Returns one value per row.
torch::Tensor jensen_shannon(const torch::Tensor& p, const torch::Tensor& q);

// Off-diagonal entries of a square matrix, as n x (n-1).
torch::Tensor off_diagonal(const torch::Tensor& square);

// Semantic relation consistency: for every patch, the softmax over its
// similarities to the other patches of the same image is computed for both
// sets; returns the mean JSD over all patches and layers, in [0, ln 2].
torch::Tensor src_loss(const PatchFeatureSet& src_feats, const PatchFeatureSet& gen_feats, double temperature);

// Hard-negative contrastive loss. Query: generated feature i; positive: source
// feature i; negatives: source features j != i, each reweighted by
// softmax_j(beta * q.n_j) (scaled to mean one). beta = 0 gives
// style_patch_nce(gen_feats, src_feats).
torch::Tensor hdce_loss(const PatchFeatureSet& src_feats, const PatchFeatureSet& gen_feats, double temperature,
                        double hardness_weight);

}  // namespace scenepipe::losses
