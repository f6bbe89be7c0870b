#include "imb/net.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "imb/math.hpp"

namespace imb {

void NetworkParams::validate() const {
    if (input_dim <= 0) throw std::invalid_argument("input_dim must be positive");
    int prev = input_dim;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerParams& lp = layers[i];
        if (lp.W.cols != prev)
            throw std::invalid_argument("layer " + std::to_string(i + 1) + " expects fan-in " +
                                        std::to_string(lp.W.cols) + ", previous width is " +
                                        std::to_string(prev));
        if (static_cast<int>(lp.b.size()) != lp.W.rows ||
            static_cast<int>(lp.r_logits.size()) != lp.W.rows)
            throw std::invalid_argument("layer " + std::to_string(i + 1) + " vector sizes");
        if (!all_finite(lp.W.data) || !all_finite(lp.b) || !all_finite(lp.r_logits))
            throw std::invalid_argument("non-finite parameter in layer " + std::to_string(i + 1));
        prev = lp.W.rows;
    }
    if (head.W.cols != prev) throw std::invalid_argument("head fan-in mismatch");
    if (static_cast<int>(head.b.size()) != head.W.rows)
        throw std::invalid_argument("head bias size");
    if (!all_finite(head.W.data) || !all_finite(head.b))
        throw std::invalid_argument("non-finite parameter in head");
}

std::size_t NetworkParams::flat_size() const {
    std::size_t n = 0;
    for (const auto& lp : layers) n += lp.W.size() + lp.b.size() + lp.r_logits.size();
    return n + head.W.size() + head.b.size();
}

void NetworkParams::to_flat(std::span<double> out) const {
    std::size_t k = 0;
    auto put = [&](const std::vector<double>& v) {
        for (double x : v) out[k++] = x;
    };
    for (const auto& lp : layers) {
        put(lp.W.data);
        put(lp.b);
        put(lp.r_logits);
    }
    put(head.W.data);
    put(head.b);
    if (k != out.size()) throw std::invalid_argument("flat buffer size mismatch");
}

void NetworkParams::from_flat(std::span<const double> in) {
    std::size_t k = 0;
    auto take = [&](std::vector<double>& v) {
        for (double& x : v) x = in[k++];
    };
    for (auto& lp : layers) {
        take(lp.W.data);
        take(lp.b);
        take(lp.r_logits);
    }
    take(head.W.data);
    take(head.b);
    if (k != in.size()) throw std::invalid_argument("flat buffer size mismatch");
}

NetworkParams NetworkParams::zeros_like(const NetworkParams& shape) {
    NetworkParams z;
    z.input_dim = shape.input_dim;
    z.layers.reserve(shape.layers.size());
    for (const auto& lp : shape.layers) {
        LayerParams zl;
        zl.W = Matrix(lp.W.rows, lp.W.cols);
        zl.b.assign(lp.b.size(), 0.0);
        zl.r_logits.assign(lp.r_logits.size(), 0.0);
        z.layers.push_back(std::move(zl));
    }
    z.head.W = Matrix(shape.head.W.rows, shape.head.W.cols);
    z.head.b.assign(shape.head.b.size(), 0.0);
    return z;
}

NetworkParams init_network(int input_dim, const std::vector<int>& widths, int n_classes,
                           RngStream& rng) {
    if (widths.empty()) throw std::invalid_argument("need at least one hidden layer");
    NetworkParams p;
    p.input_dim = input_dim;
    int prev = input_dim;
    for (int w : widths) {
        LayerParams lp;
        lp.W = Matrix(w, prev);
        const double s = std::sqrt(6.0 / (prev + w));
        for (double& x : lp.W.data) x = rng.uniform(-s, s);
        lp.b.assign(w, 0.0);
        lp.r_logits.assign(w, 0.0);
        p.layers.push_back(std::move(lp));
        prev = w;
    }
    p.head.W = Matrix(n_classes, prev);
    const double s = std::sqrt(6.0 / (prev + n_classes));
    for (double& x : p.head.W.data) x = rng.uniform(-s, s);
    p.head.b.assign(n_classes, 0.0);
    p.validate();
    return p;
}

BernoulliVector layer_forward(const NetworkParams& params, int l, std::span<const double> z_prev) {
    if (l < 1 || l > params.n_layers())
        throw std::invalid_argument("layer index " + std::to_string(l) + " out of range");
    const LayerParams& lp = params.layers[l - 1];
    if (static_cast<int>(z_prev.size()) != lp.W.cols)
        throw std::invalid_argument("layer_forward: input width " +
                                    std::to_string(z_prev.size()) + ", expected " +
                                    std::to_string(lp.W.cols));
    if (!all_finite(z_prev)) throw std::domain_error("layer_forward: non-finite input");

    BernoulliVector bv;
    bv.pre.resize(lp.W.rows);
    matvec_into(lp.W, z_prev, bv.pre);
    bv.probs.resize(lp.W.rows);
    for (int i = 0; i < lp.W.rows; ++i) {
        bv.pre[i] += lp.b[i];
        if (!std::isfinite(bv.pre[i])) throw std::domain_error("layer_forward: non-finite pre-activation");
        bv.probs[i] = sigmoid(bv.pre[i]);
    }
    return bv;
}

Vector head_forward(const NetworkParams& params, std::span<const double> z) {
    if (static_cast<int>(z.size()) != params.head.W.cols)
        throw std::invalid_argument("head_forward: input width");
    Vector out(params.head.W.rows);
    matvec_into(params.head.W, z, out);
    for (int i = 0; i < params.head.W.rows; ++i) out[i] += params.head.b[i];
    softmax_inplace(out);
    return out;
}

Vector sample_layer(const BernoulliVector& bv, RngStream& rng) {
    Vector z(bv.probs.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = rng.bernoulli(bv.probs[i]) ? 1.0 : 0.0;
    return z;
}

ParticleCloud grow_particles(const NetworkParams& params, std::span<const double> x, int m,
                             Growth growth, RngStream& rng, std::size_t particle_budget,
                             bool det_limit) {
    if (m < 1) throw std::invalid_argument("grow_particles: m must be >= 1");
    if (static_cast<int>(x.size()) != params.input_dim)
        throw std::invalid_argument("grow_particles: input width");
    const int n_layers = params.n_layers();

    if (growth == Growth::tree) {
        std::size_t count = 1;
        for (int l = 1; l <= n_layers; ++l) {
            if (count > particle_budget / static_cast<std::size_t>(m))
                throw std::runtime_error(
                    "grow_particles: tree growth needs " + std::to_string(m) + "^" +
                    std::to_string(n_layers) + " particles per input, budget is " +
                    std::to_string(particle_budget));
            count *= static_cast<std::size_t>(m);
        }
    }

    ParticleCloud cloud;
    cloud.growth = growth;
    cloud.m_samples = m;
    cloud.det_limit = det_limit;
    cloud.input.assign(x.begin(), x.end());
    cloud.layers.resize(n_layers);

    for (int l = 1; l <= n_layers; ++l) {
        const std::vector<Particle>* prev = l > 1 ? &cloud.layers[l - 2] : nullptr;
        std::vector<Particle>& cur = cloud.layers[l - 1];
        const int n_parents = prev ? static_cast<int>(prev->size()) : 1;
        const int children = (growth == Growth::tree || l == 1) ? m : 1;
        cur.reserve(static_cast<std::size_t>(n_parents) * children);
        for (int s = 0; s < n_parents; ++s) {
            std::span<const double> z_prev = prev ? std::span<const double>((*prev)[s].z) : x;
            BernoulliVector bv = layer_forward(params, l, z_prev);
            for (int k = 0; k < children; ++k) {
                Particle p;
                p.parent = s;
                p.gen = bv;
                p.z = det_limit ? bv.probs : sample_layer(bv, rng);
                cur.push_back(std::move(p));
            }
        }
    }
    return cloud;
}

}  // namespace imb
