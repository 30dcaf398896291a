#pragma once

#include <filesystem>

#include "scenepipe/core/dataset.hpp"
#include "scenepipe/priors/priors.hpp"

namespace scenepipe::select {

// Mean over pixels of -log p_pred(label_target). The target SegMap supplies
// argmax labels, the prediction SegMap supplies the distribution.
double cross_entropy(const priors::SegMap& target, const priors::SegMap& prediction);

// Semantic consistency of a pseudo pair: x_p's labels as target, y_p's
// distribution as prediction.
double consistency_score(const core::PseudoPair& pair, const priors::Segmenter& seg);

// Semantic abundance: the anime member shows at least two categories.
bool abundance_ok(const core::PseudoPair& pair, const priors::Segmenter& seg);

struct PairVerdict {
  double score = 0.0;
  int64_t categories = 0;
  bool kept = false;
};

// Keep iff score <= threshold and the anime member has >= 2 categories.
PairVerdict judge_pair(const core::PseudoPair& pair, const priors::Segmenter& seg, double threshold);

// Scores every pair listed in the dataset manifest, records bce_score,
// category count and kept flag, and rewrites the manifest. Idempotent.
core::Manifest filter_dataset(const std::filesystem::path& root, const priors::Segmenter& seg, double threshold);

}  // namespace scenepipe::select
