#pragma once

#include <functional>

#include <torch/torch.h>

namespace scenepipe::losses {

enum class GanMode { generator, discriminator };
enum class GanKind { least_squares, nonsaturating };

// least_squares:  D = 1/2 E[(s_real-1)^2] + 1/2 E[s_fake^2],  G = 1/2 E[(s_fake-1)^2]
// nonsaturating:  D = E[softplus(-s_real)] + E[softplus(s_fake)],  G = E[softplus(-s_fake)]
// `real_scores` is ignored (may be undefined) in generator mode. NaN scores
// throw NumericError.
torch::Tensor adversarial_loss(const torch::Tensor& real_scores, const torch::Tensor& fake_scores, GanMode mode,
                               GanKind kind);

using Critic = std::function<torch::Tensor(const torch::Tensor&)>;

// Channel concatenation (y_or_fake, x_p) consumed by the conditional discriminator.
torch::Tensor conditional_input(const torch::Tensor& y_or_fake, const torch::Tensor& x_p);

// Least-squares generator loss on d((fake, x_p)).
torch::Tensor conditional_generator_loss(const Critic& d, const torch::Tensor& x_p, const torch::Tensor& fake);

// Least-squares discriminator loss: (y_p, x_p) is real, (fake, x_p) is fake.
// `fake` should already be detached by the caller when only D is updated.
torch::Tensor conditional_discriminator_loss(const Critic& d, const torch::Tensor& x_p, const torch::Tensor& y_p,
                                             const torch::Tensor& fake);

}  // namespace scenepipe::losses
