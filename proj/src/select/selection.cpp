#include "scenepipe/select/selection.hpp"

#include <cmath>

#include "scenepipe/core/errors.hpp"

namespace scenepipe::select {

double cross_entropy(const priors::SegMap& target, const priors::SegMap& prediction) {
  if (target.height() != prediction.height() || target.width() != prediction.width()) {
    throw ShapeError("segmentation maps differ in resolution");
  }
  if (target.labels.max().item<int64_t>() >= prediction.num_classes()) {
    throw ShapeError("target labels exceed the prediction's class count");
  }
  const torch::Tensor picked = prediction.probs.gather(0, target.labels.unsqueeze(0)).squeeze(0);
  // probabilities floored so a ruled-out pixel gives a large finite penalty
  return (-torch::log(picked.clamp_min(1e-300))).mean().item<double>();
}

double consistency_score(const core::PseudoPair& pair, const priors::Segmenter& seg) {
  return cross_entropy(seg.segment(pair.x_p.tensor()), seg.segment(pair.y_p.tensor()));
}

bool abundance_ok(const core::PseudoPair& pair, const priors::Segmenter& seg) {
  return seg.segment(pair.y_p.tensor()).categories.size() >= 2;
}

PairVerdict judge_pair(const core::PseudoPair& pair, const priors::Segmenter& seg, double threshold) {
  const auto seg_x = seg.segment(pair.x_p.tensor());
  const auto seg_y = seg.segment(pair.y_p.tensor());
  PairVerdict v;
  v.score = cross_entropy(seg_x, seg_y);
  v.categories = static_cast<int64_t>(seg_y.categories.size());
  v.kept = v.score <= threshold && v.categories >= 2;
  return v;
}

core::Manifest filter_dataset(const std::filesystem::path& root, const priors::Segmenter& seg, double threshold) {
  if (std::isnan(threshold)) throw ArgumentError("threshold must not be NaN");
  core::Manifest manifest = core::read_manifest(core::manifest_path(root));
  for (auto& rec : manifest) {
    const auto verdict = judge_pair(core::load_pair(root, rec), seg, threshold);
    rec.bce_score = verdict.score;
    rec.category_count = verdict.categories;
    rec.kept = verdict.kept;
  }
  core::write_manifest(manifest, core::manifest_path(root));
  return manifest;
}

}  // namespace scenepipe::select
