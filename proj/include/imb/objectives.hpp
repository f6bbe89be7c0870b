#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "imb/net.hpp"

namespace imb {

// Per-layer weights of the joint objective: layer l contributes
// gamma_l * (vcr_l + beta_l * comp_l). Putting the multiplier on the
// compression side only rescales each per-layer objective, and it is the
// orientation that trains: relevance leads, compression regularizes.
// With the weight on the relevance side instead, unit-weight compression
// collapses every layer to its marginal. Layer 0 has no compression term,
// so beta_at(0) is cosmetic.
struct ObjectiveWeights {
    Vector gamma;  // size L+1, indexed by layer 0..L
    Vector beta;   // size L, indexed by hidden layer 1..L

    void validate(int n_layers) const;
    double beta_at(int l) const { return l == 0 ? 1.0 : beta[l - 1]; }
};

// KL(Bernoulli(p) || Bernoulli(r)) in nats, 0 log 0 := 0.
double bernoulli_kl(double p, double r);

// Monte-Carlo estimate of the factorized compression bound on I(Z_l; Z_{l-1}):
// mean over sampled states entering layer l of sum_i KL(p(z_{l,i}|z_{l-1}) || r_{l,i}).
double compression_term(const ParticleCloud& cloud, const NetworkParams& params, int l);

struct VcrOptions {
    // Chain growth only: number of fresh path continuations per particle for
    // the inner expectation of the relevance decoder. 1 reuses the stored
    // path (Jensen-gap biased, the training default).
    int resamples = 1;
    RngStream* rng = nullptr;
};

struct VcrValue {
    double nats = 0.0;
    std::uint64_t floor_clamps = 0;  // inner averages clamped at the probability floor
};

// Monte-Carlo estimate of the variational conditional relevance H~(Y|Z_l),
// l in 0..L. The inner average over continuations is taken before the log.
VcrValue vcr_term(const ParticleCloud& cloud, const NetworkParams& params, int l, int label,
                  const VcrOptions& opts = {});

// -log(mean over full paths of head probability of the label); identical
// reduction to vcr_term at l = 0.
VcrValue nll_term(const ParticleCloud& cloud, const NetworkParams& params, int label);

struct ObjectiveBreakdown {
    Vector vcr;    // size L+1, nats
    Vector comp;   // size L+1, comp[0] = 0 by convention
    Vector gamma;  // weights used
    Vector beta;   // size L+1 as applied (beta[0] = 1)
    double total = 0.0;
    std::uint64_t floor_clamps = 0;

    int n_layers() const { return static_cast<int>(vcr.size()) - 1; }
    double layer_term(int l) const { return gamma[l] * (vcr[l] + beta[l] * comp[l]); }
};

// total = sum_l gamma_l (vcr_l + beta_l comp_l), averaged over the inputs in
// index order.
ObjectiveBreakdown joint_objective(std::span<const ParticleCloud> clouds,
                                   std::span<const int> labels, const NetworkParams& params,
                                   const ObjectiveWeights& weights);

// The frozen-noise surrogate loss differentiated by raiko_backward: each
// sampled unit is replayed as sigma(a(theta)) + eps with eps frozen at
// (sample - probability) from the stored cloud. At the parameters that grew
// the cloud this equals joint_objective; finite differences of it recover
// the Raiko gradient.
double surrogate_objective(std::span<const ParticleCloud> clouds, std::span<const int> labels,
                           const NetworkParams& params, const ObjectiveWeights& weights);

namespace detail {

// Inner means of the relevance-decoder continuations: means[l-1][s] is the
// average head probability of the label over the layer-L descendants of
// particle s at layer l; root is the same average over all full paths.
// Shared between the objective evaluation and the Raiko backward pass so
// both see identical floating-point reductions.
struct InnerMeans {
    std::vector<Vector> means;
    double root = 0.0;
};

InnerMeans compute_inner_means(const ParticleCloud& cloud, const NetworkParams& params, int label,
                               std::vector<Vector>* head_probs = nullptr);
VcrValue vcr_from_means(const InnerMeans& im, int l);

}  // namespace detail

}  // namespace imb
