#include "scenepipe/eval/metrics.hpp"

#include <cmath>

#include "scenepipe/core/errors.hpp"
#include "scenepipe/select/selection.hpp"

namespace scenepipe::eval {

namespace {

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x, const Eigen::VectorXd& mu) {
  const Eigen::MatrixXd centered = x.rowwise() - mu.transpose();
  return centered.transpose() * centered / static_cast<double>(x.rows() - 1);
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  const Eigen::VectorXd roots = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double fid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) throw ShapeError("feature dims differ: " + std::to_string(a.cols()) + " vs " + std::to_string(b.cols()));
  if (a.rows() < 2 || b.rows() < 2) throw ArgumentError("fid needs at least two samples per set");
  if (!a.allFinite() || !b.allFinite()) throw NumericError("non-finite features");

  const Eigen::VectorXd mu_a = a.colwise().mean();
  const Eigen::VectorXd mu_b = b.colwise().mean();
  const Eigen::MatrixXd s_a = covariance(a, mu_a);
  const Eigen::MatrixXd s_b = covariance(b, mu_b);

  // tr (S_a S_b)^1/2 == tr (S_a^1/2 S_b S_a^1/2)^1/2, and the inner one is symmetric
  const Eigen::MatrixXd ra = psd_sqrt(s_a);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ra * s_b * ra, Eigen::EigenvaluesOnly);
  const double tr_cross = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

  const double d = (mu_a - mu_b).squaredNorm() + s_a.trace() + s_b.trace() - 2.0 * tr_cross;
  if (!std::isfinite(d)) throw NumericError("fid evaluated to a non-finite value");
  return std::max(d, 0.0);
}

Eigen::MatrixXd to_matrix(const torch::Tensor& features) {
  if (features.dim() != 2) throw ShapeError("features must be N x D");
  const torch::Tensor t = features.to(torch::kFloat64).contiguous();
  Eigen::MatrixXd m(t.size(0), t.size(1));
  auto acc = t.accessor<double, 2>();
  for (int64_t i = 0; i < t.size(0); ++i) {
    for (int64_t j = 0; j < t.size(1); ++j) m(i, j) = acc[i][j];
  }
  return m;
}

double fid(const torch::Tensor& a, const torch::Tensor& b) { return fid(to_matrix(a), to_matrix(b)); }

torch::Tensor directory_features(const std::filesystem::path& dir, const priors::FeatureExtractor& extractor,
                                 std::optional<int64_t> resolution) {
  std::vector<torch::Tensor> rows;
  torch::NoGradGuard no_grad;
  for (const auto& path : core::list_images(dir)) {
    const core::ImageTensor img = resolution ? core::load_image(path, *resolution) : core::load_image(path);
    rows.push_back(extractor.features(img.batched()).to(torch::kFloat64));
  }
  if (rows.empty()) return torch::zeros({0, extractor.dim()}, torch::kFloat64);
  return torch::cat(rows, 0);
}

double bce_metric(const std::vector<core::ImageTensor>& outputs, const std::vector<core::ImageTensor>& references,
                  const priors::Segmenter& seg) {
  if (outputs.size() != references.size()) {
    throw ArgumentError("bce_metric: " + std::to_string(outputs.size()) + " outputs vs " +
                        std::to_string(references.size()) + " references");
  }
  if (outputs.empty()) throw ArgumentError("bce_metric needs at least one pair");
  double sum = 0.0;
  for (size_t i = 0; i < outputs.size(); ++i) {
    sum += select::cross_entropy(seg.segment(references[i].tensor()), seg.segment(outputs[i].tensor()));
  }
  return sum / static_cast<double>(outputs.size());
}

double bce_metric(const std::filesystem::path& outputs, const std::filesystem::path& references,
                  const priors::Segmenter& seg) {
  std::vector<core::ImageTensor> outs;
  std::vector<core::ImageTensor> refs;
  for (const auto& p : core::list_images(outputs)) outs.push_back(core::load_image(p));
  for (const auto& p : core::list_images(references)) refs.push_back(core::load_image(p));
  return bce_metric(outs, refs, seg);
}

}  // namespace scenepipe::eval
