#include "imb/gradient.hpp"

#include <cmath>
#include <stdexcept>

#include "imb/math.hpp"

namespace imb {

namespace {

void add_breakdown(ObjectiveBreakdown& sum, const ParticleCloud& cloud,
                   const detail::InnerMeans& im, const NetworkParams& params,
                   const ObjectiveWeights& weights) {
    const int n_layers = cloud.n_layers();
    if (sum.vcr.empty()) {
        sum.vcr.assign(n_layers + 1, 0.0);
        sum.comp.assign(n_layers + 1, 0.0);
        sum.gamma = weights.gamma;
        sum.beta.resize(n_layers + 1);
        for (int l = 0; l <= n_layers; ++l) sum.beta[l] = weights.beta_at(l);
    }
    for (int l = 0; l <= n_layers; ++l) {
        const VcrValue v = detail::vcr_from_means(im, l);
        sum.vcr[l] += v.nats;
        sum.floor_clamps += v.floor_clamps;
        if (l >= 1) sum.comp[l] += compression_term(cloud, params, l);
    }
}

}  // namespace

void raiko_accumulate(const ParticleCloud& cloud, int label, const NetworkParams& params,
                      const ObjectiveWeights& weights, NetworkParams& grad_sum,
                      ObjectiveBreakdown* breakdown_sum, Vector* dx) {
    const int n_layers = cloud.n_layers();
    weights.validate(n_layers);
    for (int l = 1; l <= n_layers; ++l) {
        for (const Particle& p : cloud.at_layer(l)) {
            if (p.gen.pre.size() != p.z.size())
                throw std::invalid_argument("raiko_backward: cloud lacks stored pre-activations");
        }
    }

    std::vector<Vector> head_probs;
    const detail::InnerMeans im = detail::compute_inner_means(cloud, params, label, &head_probs);
    if (breakdown_sum) add_breakdown(*breakdown_sum, cloud, im, params, weights);

    // Top-down coefficients dLoss/d(inner mean of particle s). Each VCR term
    // contributes -w_l / (N_l * v_s) at its own layer; parents pass their
    // coefficient down split evenly across children.
    const double root_coeff =
        im.root >= kProbFloor ? -weights.gamma[0] / im.root : 0.0;
    std::vector<Vector> coeff(n_layers);
    for (int l = 1; l <= n_layers; ++l) {
        const std::vector<Particle>& parts = cloud.at_layer(l);
        const std::size_t n_parents = l == 1 ? 1 : cloud.at_layer(l - 1).size();
        const double branch = static_cast<double>(parts.size()) / static_cast<double>(n_parents);
        const double w_l = weights.gamma[l];
        Vector& c = coeff[l - 1];
        c.resize(parts.size());
        for (std::size_t s = 0; s < parts.size(); ++s) {
            const double upstream = l == 1 ? root_coeff : coeff[l - 2][parts[s].parent];
            double own = 0.0;
            const double v = im.means[l - 1][s];
            if (w_l > 0.0 && v >= kProbFloor)
                own = -w_l / (static_cast<double>(parts.size()) * v);
            c[s] = own + upstream / branch;
        }
    }

    // Head backward: q[label] depends on every logit through the softmax.
    const std::vector<Particle>& top = cloud.at_layer(n_layers);
    const int n_classes = params.n_classes();
    std::vector<Vector> dz(n_layers);
    dz[n_layers - 1].assign(top.size() * params.width(n_layers), 0.0);
    Vector du(n_classes);
    for (std::size_t d = 0; d < top.size(); ++d) {
        const Vector& q = head_probs[d];
        const double g = coeff[n_layers - 1][d] * q[label];
        for (int j = 0; j < n_classes; ++j) du[j] = g * ((j == label ? 1.0 : 0.0) - q[j]);
        outer_add(grad_sum.head.W, du, top[d].z);
        axpy(1.0, du, grad_sum.head.b);
        std::span<double> dz_d(dz[n_layers - 1].data() + d * params.width(n_layers),
                               static_cast<std::size_t>(params.width(n_layers)));
        matvec_transposed_add(params.head.W, du, dz_d);
    }

    // Layer backward, deepest first. da folds in both the surrogate path
    // gradient and the closed-form KL derivative (a - rho) * p(1-p).
    for (int l = n_layers; l >= 1; --l) {
        const std::vector<Particle>& parts = cloud.at_layer(l);
        const int n_units = params.width(l);
        const int n_prev = params.width(l - 1);
        const LayerParams& lp = params.layers[l - 1];
        LayerParams& gl = grad_sum.layers[l - 1];
        const double comp_w = weights.gamma[l] * weights.beta[l - 1] /
                              static_cast<double>(parts.size());

        if (l > 1) dz[l - 2].assign(cloud.at_layer(l - 1).size() * n_prev, 0.0);
        Vector da(n_units);
        Vector da_shared;  // layer 1: all particles share the input, one outer product
        if (l == 1) da_shared.assign(n_units, 0.0);

        for (std::size_t s = 0; s < parts.size(); ++s) {
            const Particle& p = parts[s];
            std::span<const double> dz_s(dz[l - 1].data() + s * n_units,
                                         static_cast<std::size_t>(n_units));
            for (int i = 0; i < n_units; ++i) {
                const double pi = p.gen.probs[i];
                const double sp = sigmoid_prime_from_p(pi);
                double g = dz_s[i] * sp;
                if (comp_w > 0.0) {
                    g += comp_w * (p.gen.pre[i] - lp.r_logits[i]) * sp;
                    gl.r_logits[i] += comp_w * (sigmoid(lp.r_logits[i]) - pi);
                }
                da[i] = g;
            }
            if (l == 1) {
                axpy(1.0, da, da_shared);
            } else {
                outer_add(gl.W, da, cloud.at_layer(l - 1)[p.parent].z);
                std::span<double> dz_parent(dz[l - 2].data() + p.parent * n_prev,
                                            static_cast<std::size_t>(n_prev));
                matvec_transposed_add(lp.W, da, dz_parent);
            }
            axpy(1.0, da, gl.b);
        }
        if (l == 1) {
            outer_add(gl.W, da_shared, cloud.input);
            if (dx) matvec_transposed_add(lp.W, da_shared, *dx);
        }
    }
}

GradientResult raiko_backward(std::span<const ParticleCloud> clouds, std::span<const int> labels,
                              const NetworkParams& params, const ObjectiveWeights& weights) {
    if (clouds.empty() || clouds.size() != labels.size())
        throw std::invalid_argument("raiko_backward: clouds/labels mismatch");
    GradientResult res;
    res.grad = NetworkParams::zeros_like(params);
    for (std::size_t i = 0; i < clouds.size(); ++i) {
        raiko_accumulate(clouds[i], labels[i], params, weights, res.grad, &res.breakdown);
    }
    const double inv_n = 1.0 / static_cast<double>(clouds.size());
    std::size_t n = res.grad.flat_size();
    Vector flat(n);
    res.grad.to_flat(flat);
    for (double& x : flat) x *= inv_n;
    res.grad.from_flat(flat);
    res.breakdown.total = 0.0;
    for (int l = 0; l <= res.breakdown.n_layers(); ++l) {
        res.breakdown.vcr[l] *= inv_n;
        res.breakdown.comp[l] *= inv_n;
        res.breakdown.total += res.breakdown.layer_term(l);
    }
    return res;
}

}  // namespace imb
