#include "scenepipe/losses/contrastive.hpp"

#include <cmath>
#include <limits>

#include "scenepipe/core/errors.hpp"
#include "scenepipe/priors/priors.hpp"

namespace scenepipe::losses {

namespace {

void check_temperature(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw ArgumentError("temperature must be a finite value > 0");
}

void require_aligned(const PatchFeatureSet& a, const PatchFeatureSet& b, int64_t min_patches) {
  if (!a.aligned_with(b)) throw AlignmentError("patch feature sets are not aligned (layer ids or locations differ)");
  if (a.layers.empty()) throw ArgumentError("patch feature sets contain no layers");
  for (size_t l = 0; l < a.layers.size(); ++l) {
    const auto& fa = a.layers[l].features;
    const auto& fb = b.layers[l].features;
    if (fa.dim() != 2 || fb.dim() != 2 || fa.sizes() != fb.sizes()) {
      throw ShapeError("layer " + std::to_string(a.layers[l].layer_id) + ": feature matrices must be n x d and equal-shaped");
    }
    if (fa.size(0) < min_patches) {
      throw ArgumentError("layer " + std::to_string(a.layers[l].layer_id) + " needs at least " +
                          std::to_string(min_patches) + " patches");
    }
  }
}

}  // namespace

bool PatchFeatureSet::aligned_with(const PatchFeatureSet& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (size_t l = 0; l < layers.size(); ++l) {
    const auto& a = layers[l];
    const auto& b = other.layers[l];
    if (a.layer_id != b.layer_id) return false;
    if (!a.locations.defined() || !b.locations.defined()) return false;
    if (a.locations.sizes() != b.locations.sizes() || !torch::equal(a.locations, b.locations)) return false;
  }
  return true;
}

torch::Tensor info_nce(const torch::Tensor& query, const torch::Tensor& positive, const torch::Tensor& negatives,
                       double temperature) {
  check_temperature(temperature);
  if (query.dim() != 1 || positive.dim() != 1) throw ShapeError("info_nce: query and positive must be vectors");
  if (negatives.dim() != 2) throw ShapeError("info_nce: negatives must be an N x d matrix");
  if (negatives.size(0) == 0) throw ArgumentError("info_nce needs at least one negative");
  const int64_t d = query.size(0);
  if (positive.size(0) != d || negatives.size(1) != d) throw ShapeError("info_nce: dimension mismatch");
  const torch::Tensor pos = (query * positive).sum().reshape({1}) / temperature;
  const torch::Tensor neg = torch::mv(negatives, query) / temperature;
  return torch::logsumexp(torch::cat({pos, neg}), 0) - pos[0];
}

torch::Tensor patch_nce(const torch::Tensor& queries, const torch::Tensor& keys, double temperature) {
  check_temperature(temperature);
  if (queries.dim() != 2 || queries.sizes() != keys.sizes()) throw ShapeError("patch_nce: queries and keys must be equal n x d");
  if (queries.size(0) < 2) throw ArgumentError("patch_nce needs at least 2 patches");
  const torch::Tensor logits = torch::matmul(queries, keys.t()) / temperature;
  return (torch::logsumexp(logits, 1) - logits.diagonal()).mean();
}

torch::Tensor style_patch_nce(const PatchFeatureSet& gen_feats, const PatchFeatureSet& target_feats,
                              double temperature) {
  require_aligned(gen_feats, target_feats, 2);
  torch::Tensor total;
  for (size_t l = 0; l < gen_feats.layers.size(); ++l) {
    const torch::Tensor q = priors::normalize_rows(gen_feats.layers[l].features);
    const torch::Tensor k = priors::normalize_rows(target_feats.layers[l].features);
    const torch::Tensor term = patch_nce(q, k, temperature);
    total = total.defined() ? total + term : term;
  }
  return total;
}

torch::Tensor jensen_shannon(const torch::Tensor& p, const torch::Tensor& q) {
  if (p.sizes() != q.sizes()) throw ShapeError("jensen_shannon: distribution shapes differ");
  // clamping keeps 0 log 0 = 0 and its gradient finite
  const double tiny = p.scalar_type() == torch::kFloat64 ? std::numeric_limits<double>::min()
                                                        : std::numeric_limits<float>::min();
  const torch::Tensor log_m = torch::log(((p + q) / 2.0).clamp_min(tiny));
  const torch::Tensor kl_pm = (p * (torch::log(p.clamp_min(tiny)) - log_m)).sum(-1);
  const torch::Tensor kl_qm = (q * (torch::log(q.clamp_min(tiny)) - log_m)).sum(-1);
  return 0.5 * (kl_pm + kl_qm);
}

namespace {

// Same divergence from log-probabilities, stable when softmax entries underflow.
torch::Tensor jensen_shannon_log(const torch::Tensor& lp, const torch::Tensor& lq) {
  const torch::Tensor log_m = torch::logaddexp(lp, lq) - std::log(2.0);
  return 0.5 * ((lp.exp() * (lp - log_m)).sum(-1) + (lq.exp() * (lq - log_m)).sum(-1));
}

}  // namespace

torch::Tensor off_diagonal(const torch::Tensor& square) {
  const int64_t n = square.size(0);
  const torch::Tensor mask = ~torch::eye(n, torch::TensorOptions().dtype(torch::kBool));
  return square.masked_select(mask).view({n, n - 1});
}

torch::Tensor src_loss(const PatchFeatureSet& src_feats, const PatchFeatureSet& gen_feats, double temperature) {
  check_temperature(temperature);
  require_aligned(src_feats, gen_feats, 2);
  torch::Tensor total;
  for (size_t l = 0; l < src_feats.layers.size(); ++l) {
    const torch::Tensor fs = priors::normalize_rows(src_feats.layers[l].features);
    const torch::Tensor fg = priors::normalize_rows(gen_feats.layers[l].features);
    const torch::Tensor ls = torch::log_softmax(off_diagonal(torch::matmul(fs, fs.t()) / temperature), 1);
    const torch::Tensor lg = torch::log_softmax(off_diagonal(torch::matmul(fg, fg.t()) / temperature), 1);
    const torch::Tensor term = jensen_shannon_log(ls, lg).mean();
    total = total.defined() ? total + term : term;
  }
  return total / static_cast<double>(src_feats.layers.size());
}

torch::Tensor hdce_loss(const PatchFeatureSet& src_feats, const PatchFeatureSet& gen_feats, double temperature,
                        double hardness_weight) {
  check_temperature(temperature);
  if (!std::isfinite(hardness_weight)) throw ArgumentError("hardness weight must be finite");
  require_aligned(src_feats, gen_feats, 2);
  torch::Tensor total;
  for (size_t l = 0; l < src_feats.layers.size(); ++l) {
    const torch::Tensor q = priors::normalize_rows(gen_feats.layers[l].features);
    const torch::Tensor k = priors::normalize_rows(src_feats.layers[l].features);
    const int64_t n = q.size(0);
    const torch::Tensor sim = torch::matmul(q, k.t());
    const torch::Tensor pos = sim.diagonal() / temperature;
    const torch::Tensor neg = off_diagonal(sim);
    const torch::Tensor log_w = torch::log_softmax(hardness_weight * neg, 1);
    const torch::Tensor log_neg =
        std::log(static_cast<double>(n - 1)) + torch::logsumexp(log_w + neg / temperature, 1);
    const torch::Tensor term = (torch::logsumexp(torch::stack({pos, log_neg}, 1), 1) - pos).mean();
    total = total.defined() ? total + term : term;
  }
  return total;
}

}  // namespace scenepipe::losses
