#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <torch/torch.h>

#include "scenepipe/core/image.hpp"
#include "scenepipe/priors/priors.hpp"

namespace scenepipe::eval {

// Frechet distance between Gaussian fits of two feature sets (rows are samples).
// Covariances use the n-1 denominator; the matrix square root goes through a
// symmetric eigendecomposition with negative eigenvalues clipped to 0.
double fid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);
double fid(const torch::Tensor& a, const torch::Tensor& b);

Eigen::MatrixXd to_matrix(const torch::Tensor& features);

// Features for every image in a directory, in filename order, as N x D float64.
torch::Tensor directory_features(const std::filesystem::path& dir, const priors::FeatureExtractor& extractor,
                                 std::optional<int64_t> resolution = std::nullopt);

// Mean consistency score over aligned (output, reference) pairs; the reference
// supplies labels and the output supplies the predicted distribution.
double bce_metric(const std::vector<core::ImageTensor>& outputs, const std::vector<core::ImageTensor>& references,
                  const priors::Segmenter& seg);
// Directory form: files are paired by sorted position.
double bce_metric(const std::filesystem::path& outputs, const std::filesystem::path& references,
                  const priors::Segmenter& seg);

}  // namespace scenepipe::eval
