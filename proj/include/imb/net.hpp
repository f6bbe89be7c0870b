#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "imb/rng.hpp"
#include "imb/tensor.hpp"

namespace imb {

// Encoder into layer l: p(z_l | z_{l-1}) = sigmoid(W z_{l-1} + b), plus the
// learnable factorized marginal r(z_l) stored as unconstrained logits.
struct LayerParams {
    Matrix W;         // [n_l x n_{l-1}]
    Vector b;         // [n_l]
    Vector r_logits;  // [n_l], marginal r_i = sigmoid(r_logits[i])
};

struct HeadParams {
    Matrix W;  // [n_classes x n_L]
    Vector b;  // [n_classes]
};

struct NetworkParams {
    int input_dim = 0;
    std::vector<LayerParams> layers;
    HeadParams head;

    int n_layers() const { return static_cast<int>(layers.size()); }
    // width(0) = input_dim, width(l) = n_l for hidden layers.
    int width(int l) const { return l == 0 ? input_dim : layers[l - 1].W.rows; }
    int n_classes() const { return head.W.rows; }

    // Checks width chaining and finiteness; throws std::invalid_argument.
    void validate() const;

    std::size_t flat_size() const;
    void to_flat(std::span<double> out) const;
    void from_flat(std::span<const double> in);

    static NetworkParams zeros_like(const NetworkParams& shape);
};

// Uniform(-s, s) weights with s = sqrt(6/(fan_in+fan_out)), zero biases,
// zero marginal logits (r = 0.5).
NetworkParams init_network(int input_dim, const std::vector<int>& widths, int n_classes,
                           RngStream& rng);

struct BernoulliVector {
    Vector probs;  // sigmoid(pre), elementwise
    Vector pre;    // pre-activations, kept for surrogate gradients
};

// probs = sigmoid(W_l z_prev + b_l) for layer l in 1..L.
BernoulliVector layer_forward(const NetworkParams& params, int l, std::span<const double> z_prev);

// softmax(W_out z + b_out); entries positive, sum to 1.
Vector head_forward(const NetworkParams& params, std::span<const double> z);

// One Bernoulli draw per unit; entries are exactly 0.0 or 1.0.
Vector sample_layer(const BernoulliVector& bv, RngStream& rng);

enum class Growth { tree, chain };

struct Particle {
    Vector z;             // binary in sampled mode; probabilities in det-limit mode
    BernoulliVector gen;  // the distribution this particle was drawn from
    int parent = -1;      // index into the previous layer (ignored at layer 1)
};

// Sampled activation sets S_1..S_L for one input. Tree growth: every
// particle spawns M children, |S_l| = M^l, children of particle s occupy
// indices [s*M, s*M+M). Chain growth: M parallel paths, particle k's parent
// is k.
struct ParticleCloud {
    Growth growth = Growth::chain;
    int m_samples = 1;
    bool det_limit = false;
    Vector input;
    std::vector<std::vector<Particle>> layers;  // layers[l-1] holds S_l

    int n_layers() const { return static_cast<int>(layers.size()); }
    const std::vector<Particle>& at_layer(int l) const { return layers[l - 1]; }
};

ParticleCloud grow_particles(const NetworkParams& params, std::span<const double> x, int m,
                             Growth growth, RngStream& rng,
                             std::size_t particle_budget = std::size_t{1} << 20,
                             bool det_limit = false);

}  // namespace imb
