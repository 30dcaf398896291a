#include "scenepipe/losses/adversarial.hpp"

#include "scenepipe/core/errors.hpp"

namespace scenepipe::losses {

namespace F = torch::nn::functional;

namespace {

void check_scores(const torch::Tensor& s, const char* which) {
  if (!s.defined()) throw ArgumentError(std::string(which) + " scores are undefined");
  if (torch::isnan(s).any().item<bool>()) throw NumericError(std::string(which) + " scores contain NaN");
}

}  // namespace

torch::Tensor adversarial_loss(const torch::Tensor& real_scores, const torch::Tensor& fake_scores, GanMode mode,
                               GanKind kind) {
  check_scores(fake_scores, "fake");
  if (mode == GanMode::generator) {
    if (kind == GanKind::least_squares) return 0.5 * (fake_scores - 1.0).pow(2).mean();
    return F::softplus(-fake_scores).mean();
  }
  check_scores(real_scores, "real");
  if (kind == GanKind::least_squares) {
    return 0.5 * (real_scores - 1.0).pow(2).mean() + 0.5 * fake_scores.pow(2).mean();
  }
  return F::softplus(-real_scores).mean() + F::softplus(fake_scores).mean();
}

torch::Tensor conditional_input(const torch::Tensor& y_or_fake, const torch::Tensor& x_p) {
  if (y_or_fake.sizes() != x_p.sizes()) throw ShapeError("conditional discriminator inputs differ in shape");
  if (y_or_fake.dim() != 4) throw ShapeError("conditional discriminator inputs must be N x C x H x W");
  return torch::cat({y_or_fake, x_p}, 1);
}

torch::Tensor conditional_generator_loss(const Critic& d, const torch::Tensor& x_p, const torch::Tensor& fake) {
  return adversarial_loss({}, d(conditional_input(fake, x_p)), GanMode::generator, GanKind::least_squares);
}

torch::Tensor conditional_discriminator_loss(const Critic& d, const torch::Tensor& x_p, const torch::Tensor& y_p,
                                             const torch::Tensor& fake) {
  return adversarial_loss(d(conditional_input(y_p, x_p)), d(conditional_input(fake, x_p)), GanMode::discriminator,
                          GanKind::least_squares);
}

}  // namespace scenepipe::losses
