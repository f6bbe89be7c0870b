#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "imb/exact.hpp"
#include "imb/objectives.hpp"

using namespace imb;

namespace {

NetworkParams make_net(int input_dim, std::vector<int> widths, int n_classes, std::uint64_t seed) {
    RngStream rng(seed);
    return init_network(input_dim, widths, n_classes, rng);
}

ParticleCloud cloud_for(const NetworkParams& p, const Vector& x, int m, Growth g,
                        std::uint64_t seed) {
    RngStream rng = RngStream::derive(seed, 0, 0);
    return grow_particles(p, x, m, g, rng);
}

ObjectiveWeights unit_weights(int n_layers, double beta = 1e-4) {
    ObjectiveWeights w;
    w.gamma.assign(n_layers + 1, 1.0);
    w.beta.assign(n_layers, beta);
    return w;
}

}  // namespace

TEST_CASE("bernoulli_kl closed form") {
    CHECK(bernoulli_kl(0.5, 0.5) == 0.0);
    CHECK(bernoulli_kl(1.0, 0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-15));

    // Oracle: extended-precision evaluation of the closed form.
    const long double p = 0.3L, r = 0.7L;
    const long double oracle = p * std::log(p / r) + (1.0L - p) * std::log((1.0L - p) / (1.0L - r));
    CHECK(bernoulli_kl(0.3, 0.7) ==
          doctest::Approx(static_cast<double>(oracle)).epsilon(1e-14));
    CHECK(static_cast<double>(oracle) == doctest::Approx(0.33891914415488145).epsilon(1e-12));

    CHECK_THROWS_AS(bernoulli_kl(0.5, 0.0), std::domain_error);
    CHECK_THROWS_AS(bernoulli_kl(0.5, 1.0), std::domain_error);
    CHECK_THROWS_AS(bernoulli_kl(-0.1, 0.5), std::domain_error);

    RngStream rng(4);
    for (int i = 0; i < 200; ++i) {
        CHECK(bernoulli_kl(rng.uniform01(), rng.uniform(0.01, 0.99)) >= 0.0);
    }
}

TEST_CASE("compression_term is zero when encoder equals marginal") {
    NetworkParams p = make_net(3, {4, 3}, 2, 5);
    for (auto& lp : p.layers) {
        std::fill(lp.W.data.begin(), lp.W.data.end(), 0.0);
        std::fill(lp.b.begin(), lp.b.end(), 0.0);
        std::fill(lp.r_logits.begin(), lp.r_logits.end(), 0.0);
    }
    const ParticleCloud c = cloud_for(p, Vector{0.3, 0.5, 0.7}, 4, Growth::chain, 1);
    CHECK(compression_term(c, p, 1) == 0.0);
    CHECK(compression_term(c, p, 2) == 0.0);
}

TEST_CASE("compression_term of a saturated single unit is log 2") {
    NetworkParams p = make_net(2, {1}, 2, 5);
    std::fill(p.layers[0].W.data.begin(), p.layers[0].W.data.end(), 0.0);
    p.layers[0].b = {40.0};  // p(z=1|.) rounds to 1
    p.layers[0].r_logits = {0.0};
    const ParticleCloud c = cloud_for(p, Vector{0.0, 0.0}, 8, Growth::chain, 1);
    CHECK(compression_term(c, p, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("vcr at the top layer is the mean negative log head probability") {
    NetworkParams p = make_net(3, {3, 2}, 2, 6);
    const ParticleCloud c = cloud_for(p, Vector{1.0, 0.0, 1.0}, 6, Growth::chain, 2);
    const int label = 1;
    double manual = 0.0;
    for (const auto& part : c.at_layer(2)) manual -= std::log(head_forward(p, part.z)[label]);
    manual /= static_cast<double>(c.at_layer(2).size());
    CHECK(vcr_term(c, p, 2, label).nats == doctest::Approx(manual).epsilon(1e-14));
}

TEST_CASE("uniform head yields log n_classes at every layer") {
    NetworkParams p = make_net(3, {3, 2}, 10, 6);
    std::fill(p.head.W.data.begin(), p.head.W.data.end(), 0.0);
    std::fill(p.head.b.begin(), p.head.b.end(), 0.0);
    const ParticleCloud c = cloud_for(p, Vector{1.0, 0.0, 1.0}, 5, Growth::tree, 2);
    for (int l = 0; l <= 2; ++l) {
        CHECK(vcr_term(c, p, l, 3).nats == doctest::Approx(std::log(10.0)).epsilon(1e-12));
    }
}

TEST_CASE("nll equals vcr at layer zero bitwise") {
    NetworkParams p = make_net(4, {4, 3}, 3, 7);
    for (auto growth : {Growth::chain, Growth::tree}) {
        const ParticleCloud c = cloud_for(p, Vector{0.2, 0.4, 0.6, 0.8}, 4, growth, 3);
        for (int label = 0; label < 3; ++label) {
            CHECK(nll_term(c, p, label).nats == vcr_term(c, p, 0, label).nats);
        }
    }
}

TEST_CASE("chain growth with one continuation repeats the top-layer estimate") {
    NetworkParams p = make_net(3, {3, 3, 2}, 2, 8);
    const ParticleCloud c = cloud_for(p, Vector{1.0, 1.0, 0.0}, 7, Growth::chain, 4);
    const double top = vcr_term(c, p, 3, 0).nats;
    CHECK(vcr_term(c, p, 1, 0).nats == top);
    CHECK(vcr_term(c, p, 2, 0).nats == top);
}

TEST_CASE("joint objective reduces to the NLL under gamma = (1, 0, ..)") {
    NetworkParams p = make_net(3, {3, 2}, 2, 9);
    std::vector<ParticleCloud> clouds;
    std::vector<int> labels{0, 1, 1};
    clouds.push_back(cloud_for(p, Vector{1, 0, 0}, 4, Growth::chain, 5));
    clouds.push_back(cloud_for(p, Vector{0, 1, 0}, 4, Growth::chain, 6));
    clouds.push_back(cloud_for(p, Vector{0, 0, 1}, 4, Growth::chain, 7));

    ObjectiveWeights w = unit_weights(2);
    w.gamma = {1.0, 0.0, 0.0};
    const ObjectiveBreakdown bd = joint_objective(clouds, labels, p, w);
    double nll = 0.0;
    for (std::size_t i = 0; i < clouds.size(); ++i) nll += nll_term(clouds[i], p, labels[i]).nats;
    nll /= 3.0;
    CHECK(bd.total == doctest::Approx(nll).epsilon(1e-15));

    ObjectiveWeights off = unit_weights(2);
    off.gamma = {0.0, 0.0, 0.0};
    CHECK(joint_objective(clouds, labels, p, off).total == 0.0);
}

TEST_CASE("joint objective equals the sum of its per-layer terms") {
    NetworkParams p = make_net(4, {4, 3, 2}, 2, 10);
    std::vector<ParticleCloud> clouds;
    std::vector<int> labels;
    RngStream rng(31);
    for (int i = 0; i < 5; ++i) {
        Vector x(4);
        for (double& v : x) v = rng.uniform01();
        clouds.push_back(cloud_for(p, x, 3, Growth::chain, 100 + i));
        labels.push_back(i % 2);
    }
    const ObjectiveWeights w = unit_weights(3);
    const ObjectiveBreakdown bd = joint_objective(clouds, labels, p, w);
    double sum = 0.0;
    for (int l = 0; l <= 3; ++l) sum += bd.layer_term(l);
    CHECK(std::abs(bd.total - sum) < 1e-12);
    for (int l = 1; l <= 3; ++l) CHECK(bd.comp[l] >= 0.0);
    CHECK(bd.comp[0] == 0.0);
}

TEST_CASE("factorized multi-head VCR decomposes into per-coordinate VCRs") {
    // Two independent binary heads composed into one 4-class head whose
    // softmax factorizes: logits u[(y1,y2)] = u1[y1] + u2[y2].
    RngStream rng(17);
    NetworkParams base = make_net(3, {4, 3}, 2, 11);
    NetworkParams head_a = base, head_b = base;
    for (double& v : head_a.head.W.data) v = rng.uniform(-1.0, 1.0);
    for (double& v : head_a.head.b) v = rng.uniform(-1.0, 1.0);
    for (double& v : head_b.head.W.data) v = rng.uniform(-1.0, 1.0);
    for (double& v : head_b.head.b) v = rng.uniform(-1.0, 1.0);

    NetworkParams joint = base;
    joint.head.W = Matrix(4, 3);
    joint.head.b.assign(4, 0.0);
    for (int y1 = 0; y1 < 2; ++y1)
        for (int y2 = 0; y2 < 2; ++y2) {
            const int cls = y1 * 2 + y2;
            for (int j = 0; j < 3; ++j)
                joint.head.W.at(cls, j) = head_a.head.W.at(y1, j) + head_b.head.W.at(y2, j);
            joint.head.b[cls] = head_a.head.b[y1] + head_b.head.b[y2];
        }

    const Vector x{0.2, 0.9, 0.4};
    RngStream grow_rng(3);
    const ParticleCloud c = grow_particles(joint, x, 16, Growth::chain, grow_rng);
    const int L = 2;
    for (int y1 = 0; y1 < 2; ++y1)
        for (int y2 = 0; y2 < 2; ++y2) {
            const double lhs = vcr_term(c, joint, L, y1 * 2 + y2).nats;
            const double rhs =
                vcr_term(c, head_a, L, y1).nats + vcr_term(c, head_b, L, y2).nats;
            CHECK(std::abs(lhs - rhs) < 1e-10);
        }
}

TEST_CASE("resampled continuations shrink the chain estimator's Jensen gap") {
    // With K=1 the chain estimate of H~(Y|Z_1) is biased upward (log of a
    // single-sample inner mean); averaging K fresh continuations before the
    // log must land closer to the exhaustive value.
    RngStream rng(91);
    NetworkParams p = init_network(2, {2, 2}, 2, rng);
    Matrix inputs(4, 2);
    for (int s = 0; s < 4; ++s)
        for (int i = 0; i < 2; ++i) inputs.at(s, i) = (s >> i) & 1;
    const Vector px(4, 0.25);
    Matrix py_x(4, 2);
    for (int x = 0; x < 4; ++x) py_x.at(x, x % 2) = 1.0;
    const double exact1 = exact::exact_vcr_nats(p, inputs, px, py_x, 1);

    double est_k1 = 0.0, est_k64 = 0.0;
    const int reps = 20;
    for (int rep = 0; rep < reps; ++rep) {
        for (int x = 0; x < 4; ++x) {
            RngStream grow = RngStream::derive(500 + rep, 1, x);
            const ParticleCloud c = grow_particles(p, inputs.row(x), 64, Growth::chain, grow);
            est_k1 += vcr_term(c, p, 1, x % 2).nats / 4.0;
            RngStream cont = RngStream::derive(600 + rep, 2, x);
            VcrOptions opts;
            opts.resamples = 64;
            opts.rng = &cont;
            est_k64 += vcr_term(c, p, 1, x % 2, opts).nats / 4.0;
        }
    }
    est_k1 /= reps;
    est_k64 /= reps;
    CHECK(est_k1 >= exact1 - 1e-6);  // Jensen bias is upward
    CHECK(std::abs(est_k64 - exact1) < std::abs(est_k1 - exact1));
}

TEST_CASE("surrogate objective matches the sampled objective at the growth point") {
    NetworkParams p = make_net(4, {4, 3}, 3, 12);
    std::vector<ParticleCloud> clouds;
    std::vector<int> labels;
    RngStream rng(5);
    for (int i = 0; i < 4; ++i) {
        Vector x(4);
        for (double& v : x) v = rng.uniform01();
        clouds.push_back(cloud_for(p, x, 4, i % 2 ? Growth::chain : Growth::tree, 50 + i));
        labels.push_back(i % 3);
    }
    const ObjectiveWeights w = unit_weights(2, 0.3);
    const double a = joint_objective(clouds, labels, p, w).total;
    const double b = surrogate_objective(clouds, labels, p, w);
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
}
