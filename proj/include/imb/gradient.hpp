#pragma once

#include <span>

#include "imb/objectives.hpp"

namespace imb {

struct GradientResult {
    NetworkParams grad;  // fields hold gradients, same shape as the parameters
    ObjectiveBreakdown breakdown;
};

// Gradient of the Monte-Carlo joint objective under the Raiko surrogate:
// sampled binary units pass gradients through sigma(a) while the forward
// values stay the samples; KL compression terms and their marginal logits
// are differentiated in closed form. Mean over inputs in index order.
// The returned breakdown is bitwise identical to joint_objective on the
// same clouds.
GradientResult raiko_backward(std::span<const ParticleCloud> clouds, std::span<const int> labels,
                              const NetworkParams& params, const ObjectiveWeights& weights);

// Adds one input's unscaled gradient into grad_sum (caller divides by the
// batch size). When dx is non-null the gradient w.r.t. the input vector is
// accumulated there as well.
void raiko_accumulate(const ParticleCloud& cloud, int label, const NetworkParams& params,
                      const ObjectiveWeights& weights, NetworkParams& grad_sum,
                      ObjectiveBreakdown* breakdown_sum = nullptr, Vector* dx = nullptr);

}  // namespace imb
