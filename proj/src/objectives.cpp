#include "imb/objectives.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "imb/math.hpp"

namespace imb {

void ObjectiveWeights::validate(int n_layers) const {
    if (static_cast<int>(gamma.size()) != n_layers + 1)
        throw std::invalid_argument("gamma must have one entry per layer 0..L");
    if (static_cast<int>(beta.size()) != n_layers)
        throw std::invalid_argument("beta must have one entry per hidden layer 1..L");
    for (double g : gamma)
        if (!(g >= 0.0)) throw std::invalid_argument("gamma entries must be >= 0");
    for (double b : beta)
        if (!(b > 0.0)) throw std::invalid_argument("beta entries must be > 0");
}

double bernoulli_kl(double p, double r) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("bernoulli_kl: p outside [0,1]");
    if (!(r > 0.0 && r < 1.0)) throw std::domain_error("bernoulli_kl: r outside open (0,1)");
    const double kl = xlogx_over(p, r) + xlogx_over(1.0 - p, 1.0 - r);
    return kl > 0.0 ? kl : 0.0;
}

double compression_term(const ParticleCloud& cloud, const NetworkParams& params, int l) {
    if (l < 1 || l > cloud.n_layers())
        throw std::invalid_argument("compression_term: layer " + std::to_string(l));
    const std::vector<Particle>& parts = cloud.at_layer(l);
    if (parts.empty()) throw std::invalid_argument("compression_term: empty cloud");
    const Vector& rho = params.layers[l - 1].r_logits;

    // Every state entering layer l appears with the same multiplicity, so the
    // mean over layer-l generating distributions equals the mean over sampled
    // layer-(l-1) states.
    double acc = 0.0;
    for (const Particle& p : parts) {
        double kl = 0.0;
        for (std::size_t i = 0; i < rho.size(); ++i) {
            kl += bernoulli_kl(p.gen.probs[i], sigmoid(rho[i]));
        }
        acc += kl;
    }
    return acc / static_cast<double>(parts.size());
}

namespace detail {

InnerMeans compute_inner_means(const ParticleCloud& cloud, const NetworkParams& params, int label,
                               std::vector<Vector>* head_probs) {
    const int n_layers = cloud.n_layers();
    InnerMeans im;
    im.means.resize(n_layers);

    const std::vector<Particle>& top = cloud.at_layer(n_layers);
    Vector& vtop = im.means[n_layers - 1];
    vtop.resize(top.size());
    if (head_probs) head_probs->resize(top.size());
    for (std::size_t d = 0; d < top.size(); ++d) {
        Vector q = head_forward(params, top[d].z);
        vtop[d] = q[label];
        if (head_probs) (*head_probs)[d] = std::move(q);
    }

    for (int l = n_layers - 1; l >= 1; --l) {
        const std::vector<Particle>& children = cloud.at_layer(l + 1);
        const Vector& vchild = im.means[l];
        Vector& v = im.means[l - 1];
        v.assign(cloud.at_layer(l).size(), 0.0);
        for (std::size_t k = 0; k < children.size(); ++k) v[children[k].parent] += vchild[k];
        const double inv = static_cast<double>(v.size()) / static_cast<double>(children.size());
        for (double& x : v) x *= inv;
    }

    double root = 0.0;
    for (double x : im.means[0]) root += x;
    im.root = root / static_cast<double>(im.means[0].size());
    return im;
}

}  // namespace detail

namespace {

double clamped_neg_log(double v, std::uint64_t& clamps) {
    if (v < kProbFloor) {
        ++clamps;
        v = kProbFloor;
    }
    return -std::log(v);
}

}  // namespace

namespace detail {

VcrValue vcr_from_means(const InnerMeans& im, int l) {
    VcrValue out;
    if (l == 0) {
        out.nats = clamped_neg_log(im.root, out.floor_clamps);
        return out;
    }
    const Vector& v = im.means[l - 1];
    double acc = 0.0;
    for (double x : v) acc += clamped_neg_log(x, out.floor_clamps);
    out.nats = acc / static_cast<double>(v.size());
    return out;
}

}  // namespace detail

VcrValue vcr_term(const ParticleCloud& cloud, const NetworkParams& params, int l, int label,
                  const VcrOptions& opts) {
    const int n_layers = cloud.n_layers();
    if (l < 0 || l > n_layers) throw std::invalid_argument("vcr_term: layer " + std::to_string(l));
    if (cloud.at_layer(1).empty()) throw std::invalid_argument("vcr_term: empty cloud");

    if (opts.resamples > 1 && l >= 1 && l < n_layers && cloud.growth == Growth::chain) {
        if (opts.rng == nullptr)
            throw std::invalid_argument("vcr_term: resampled continuations need an rng");
        const std::vector<Particle>& parts = cloud.at_layer(l);
        VcrValue out;
        double acc = 0.0;
        for (const Particle& p : parts) {
            double inner = 0.0;
            for (int k = 0; k < opts.resamples; ++k) {
                Vector z = p.z;
                for (int j = l + 1; j <= n_layers; ++j) {
                    BernoulliVector bv = layer_forward(params, j, z);
                    z = cloud.det_limit ? bv.probs : sample_layer(bv, *opts.rng);
                }
                inner += head_forward(params, z)[label];
            }
            acc += clamped_neg_log(inner / opts.resamples, out.floor_clamps);
        }
        out.nats = acc / static_cast<double>(parts.size());
        return out;
    }

    return detail::vcr_from_means(detail::compute_inner_means(cloud, params, label), l);
}

VcrValue nll_term(const ParticleCloud& cloud, const NetworkParams& params, int label) {
    return vcr_term(cloud, params, 0, label);
}

ObjectiveBreakdown joint_objective(std::span<const ParticleCloud> clouds,
                                   std::span<const int> labels, const NetworkParams& params,
                                   const ObjectiveWeights& weights) {
    if (clouds.empty() || clouds.size() != labels.size())
        throw std::invalid_argument("joint_objective: clouds/labels mismatch");
    const int n_layers = clouds[0].n_layers();
    weights.validate(n_layers);

    ObjectiveBreakdown bd;
    bd.vcr.assign(n_layers + 1, 0.0);
    bd.comp.assign(n_layers + 1, 0.0);
    bd.gamma = weights.gamma;
    bd.beta.resize(n_layers + 1);
    for (int l = 0; l <= n_layers; ++l) bd.beta[l] = weights.beta_at(l);

    for (std::size_t i = 0; i < clouds.size(); ++i) {
        const detail::InnerMeans im = detail::compute_inner_means(clouds[i], params, labels[i]);
        for (int l = 0; l <= n_layers; ++l) {
            const VcrValue v = detail::vcr_from_means(im, l);
            bd.vcr[l] += v.nats;
            bd.floor_clamps += v.floor_clamps;
            if (l >= 1) bd.comp[l] += compression_term(clouds[i], params, l);
        }
    }
    const double inv_n = 1.0 / static_cast<double>(clouds.size());
    for (int l = 0; l <= n_layers; ++l) {
        bd.vcr[l] *= inv_n;
        bd.comp[l] *= inv_n;
        bd.total += bd.layer_term(l);
    }
    return bd;
}

double surrogate_objective(std::span<const ParticleCloud> clouds, std::span<const int> labels,
                           const NetworkParams& params, const ObjectiveWeights& weights) {
    if (clouds.empty() || clouds.size() != labels.size())
        throw std::invalid_argument("surrogate_objective: clouds/labels mismatch");
    const int n_layers = clouds[0].n_layers();
    weights.validate(n_layers);

    double total = 0.0;
    std::uint64_t clamps = 0;
    for (std::size_t i = 0; i < clouds.size(); ++i) {
        const ParticleCloud& cloud = clouds[i];
        const int label = labels[i];

        // Real-valued replay: zhat = sigma(a(theta)) + frozen noise.
        std::vector<std::vector<Vector>> zhat(n_layers);
        Vector comp_sums(n_layers + 1, 0.0);
        std::vector<Vector> means(n_layers);

        for (int l = 1; l <= n_layers; ++l) {
            const std::vector<Particle>& parts = cloud.at_layer(l);
            zhat[l - 1].resize(parts.size());
            const Vector& rho = params.layers[l - 1].r_logits;
            for (std::size_t s = 0; s < parts.size(); ++s) {
                const Particle& p = parts[s];
                std::span<const double> z_prev =
                    l == 1 ? std::span<const double>(cloud.input)
                           : std::span<const double>(zhat[l - 2][p.parent]);
                BernoulliVector bv = layer_forward(params, l, z_prev);
                Vector& z = zhat[l - 1][s];
                z.resize(bv.probs.size());
                double kl = 0.0;
                for (std::size_t u = 0; u < z.size(); ++u) {
                    z[u] = bv.probs[u] + (p.z[u] - p.gen.probs[u]);
                    kl += bernoulli_kl(bv.probs[u], sigmoid(rho[u]));
                }
                comp_sums[l] += kl;
            }
            comp_sums[l] /= static_cast<double>(parts.size());
        }

        const std::vector<Particle>& top = cloud.at_layer(n_layers);
        Vector v(top.size());
        for (std::size_t d = 0; d < top.size(); ++d)
            v[d] = head_forward(params, zhat[n_layers - 1][d])[label];
        means[n_layers - 1] = v;
        for (int l = n_layers - 1; l >= 1; --l) {
            const std::vector<Particle>& children = cloud.at_layer(l + 1);
            Vector up(cloud.at_layer(l).size(), 0.0);
            for (std::size_t k = 0; k < children.size(); ++k)
                up[children[k].parent] += means[l][k];
            const double inv = static_cast<double>(up.size()) / static_cast<double>(children.size());
            for (double& x : up) x *= inv;
            means[l - 1] = std::move(up);
        }
        double root = 0.0;
        for (double x : means[0]) root += x;
        root /= static_cast<double>(means[0].size());

        double obj = weights.gamma[0] * clamped_neg_log(root, clamps);
        for (int l = 1; l <= n_layers; ++l) {
            double acc = 0.0;
            for (double x : means[l - 1]) acc += clamped_neg_log(x, clamps);
            const double vcr_l = acc / static_cast<double>(means[l - 1].size());
            obj += weights.gamma[l] * (vcr_l + weights.beta[l - 1] * comp_sums[l]);
        }
        total += obj;
    }
    return total / static_cast<double>(clouds.size());
}

}  // namespace imb
