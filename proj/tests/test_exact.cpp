#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "imb/exact.hpp"
#include "imb/objectives.hpp"

using namespace imb;

namespace {

NetworkParams random_net(int input_dim, std::vector<int> widths, int n_classes,
                         std::uint64_t seed) {
    RngStream rng(seed);
    NetworkParams p = init_network(input_dim, widths, n_classes, rng);
    for (auto& lp : p.layers) {
        for (double& b : lp.b) b = rng.uniform(-0.5, 0.5);
        for (double& r : lp.r_logits) r = rng.uniform(-0.5, 0.5);
    }
    for (double& b : p.head.b) b = rng.uniform(-0.5, 0.5);
    return p;
}

Matrix all_binary_patterns(int n_bits) {
    Matrix m(1 << n_bits, n_bits);
    for (int s = 0; s < m.rows; ++s)
        for (int i = 0; i < n_bits; ++i) m.at(s, i) = (s >> i) & 1;
    return m;
}

}  // namespace

TEST_CASE("propagate_exact: saturated weights make one-hot rows") {
    NetworkParams p = random_net(2, {2}, 2, 1);
    // unit i copies input bit i through a steep sigmoid
    p.layers[0].W = Matrix(2, 2);
    p.layers[0].W.at(0, 0) = 1000.0;
    p.layers[0].W.at(1, 1) = 1000.0;
    p.layers[0].b = {-500.0, -500.0};
    const Matrix inputs = all_binary_patterns(2);
    const auto dists = exact::propagate_exact(p, inputs);
    for (int x = 0; x < 4; ++x) {
        for (int z = 0; z < 4; ++z) {
            CHECK(dists[0].p.at(x, z) == doctest::Approx(x == z ? 1.0 : 0.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("propagate_exact: zero weights make uniform rows") {
    NetworkParams p = random_net(2, {3, 2}, 2, 2);
    for (auto& lp : p.layers) {
        std::fill(lp.W.data.begin(), lp.W.data.end(), 0.0);
        std::fill(lp.b.begin(), lp.b.end(), 0.0);
    }
    const Matrix inputs = all_binary_patterns(2);
    const auto dists = exact::propagate_exact(p, inputs);
    for (const auto& d : dists) {
        for (int x = 0; x < d.p.rows; ++x)
            for (int z = 0; z < d.p.cols; ++z)
                CHECK(d.p.at(x, z) == doctest::Approx(1.0 / d.p.cols).epsilon(1e-12));
    }
}

TEST_CASE("propagate_exact agrees with brute-force enumeration on a 2-2 net") {
    const NetworkParams p = random_net(2, {2, 2}, 2, 3);
    const Matrix inputs = all_binary_patterns(2);
    const auto dists = exact::propagate_exact(p, inputs);

    // Independent oracle: sum over all (z1, z2) pairs directly.
    for (int x = 0; x < 4; ++x) {
        const BernoulliVector bv1 = layer_forward(p, 1, inputs.row(x));
        for (int z2 = 0; z2 < 4; ++z2) {
            double total = 0.0;
            for (int z1 = 0; z1 < 4; ++z1) {
                double p1 = 1.0;
                for (int i = 0; i < 2; ++i) {
                    const double bit = (z1 >> i) & 1;
                    p1 *= bit ? bv1.probs[i] : 1.0 - bv1.probs[i];
                }
                const BernoulliVector bv2 = layer_forward(p, 2, exact::state_bits(z1, 2));
                double p2 = 1.0;
                for (int i = 0; i < 2; ++i) {
                    const double bit = (z2 >> i) & 1;
                    p2 *= bit ? bv2.probs[i] : 1.0 - bv2.probs[i];
                }
                total += p1 * p2;
            }
            CHECK(std::abs(dists[1].p.at(x, z2) - total) < 1e-12);
        }
    }
}

TEST_CASE("propagate_exact rows are normalized") {
    const NetworkParams p = random_net(3, {4, 3}, 2, 4);
    const Matrix inputs = all_binary_patterns(3);
    for (const auto& d : exact::propagate_exact(p, inputs)) {
        for (int x = 0; x < d.p.rows; ++x) {
            double sum = 0.0;
            for (int z = 0; z < d.p.cols; ++z) sum += d.p.at(x, z);
            CHECK(std::abs(sum - 1.0) < 1e-10);
        }
    }
}

TEST_CASE("propagate_exact budget errors name the layer") {
    const NetworkParams p = random_net(3, {10}, 2, 5);
    const Matrix inputs = all_binary_patterns(3);
    exact::Budget tight;
    tight.max_states_per_layer = 64;
    CHECK_THROWS_WITH_AS(exact::propagate_exact(p, inputs, tight), doctest::Contains("layer 1"),
                         std::runtime_error);
}

TEST_CASE("mutual_info on canonical channels") {
    // identity channel, uniform binary input -> 1 bit
    Matrix ident(2, 2);
    ident.at(0, 0) = 1.0;
    ident.at(1, 1) = 1.0;
    const Vector uni{0.5, 0.5};
    CHECK(exact::mutual_info(ident, uni) == doctest::Approx(1.0).epsilon(1e-12));

    // independent channel -> 0 bits
    Matrix indep(2, 2, 0.5);
    CHECK(exact::mutual_info(indep, uni) == doctest::Approx(0.0).epsilon(1e-12));

    // binary symmetric channel, flip 0.25: closed-form 1 - Hb(0.25)
    Matrix bsc(2, 2);
    bsc.at(0, 0) = 0.75;
    bsc.at(0, 1) = 0.25;
    bsc.at(1, 0) = 0.25;
    bsc.at(1, 1) = 0.75;
    const double hb = -0.25 * std::log2(0.25) - 0.75 * std::log2(0.75);
    CHECK(exact::mutual_info(bsc, uni) == doctest::Approx(1.0 - hb).epsilon(1e-12));
}

TEST_CASE("layer_relevance identities") {
    // Y = X: I(Z;Y) = I(Z;X) for any channel.
    Matrix chan(3, 4);
    RngStream rng(6);
    for (int x = 0; x < 3; ++x) {
        double sum = 0.0;
        for (int z = 0; z < 4; ++z) {
            chan.at(x, z) = rng.uniform(0.05, 1.0);
            sum += chan.at(x, z);
        }
        for (int z = 0; z < 4; ++z) chan.at(x, z) /= sum;
    }
    const Vector px{0.5, 0.3, 0.2};
    Matrix y_eq_x(3, 3);
    for (int x = 0; x < 3; ++x) y_eq_x.at(x, x) = 1.0;
    CHECK(exact::layer_relevance(chan, px, y_eq_x) ==
          doctest::Approx(exact::mutual_info(chan, px)).epsilon(1e-12));

    // Z independent of X -> 0
    Matrix indep(3, 4, 0.25);
    Matrix py_x(3, 2);
    for (int x = 0; x < 3; ++x) {
        py_x.at(x, 0) = 0.3;
        py_x.at(x, 1) = 0.7;
    }
    CHECK(exact::layer_relevance(indep, px, py_x) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("layer_relevance agrees with a direct double-sum oracle") {
    RngStream rng(7);
    const int nx = 3, ny = 3, nz = 4;
    Matrix chan(nx, nz), py_x(nx, ny);
    Vector px(nx);
    double psum = 0.0;
    for (int x = 0; x < nx; ++x) {
        px[x] = rng.uniform(0.1, 1.0);
        psum += px[x];
        double cs = 0.0, ys = 0.0;
        for (int z = 0; z < nz; ++z) cs += (chan.at(x, z) = rng.uniform(0.05, 1.0));
        for (int z = 0; z < nz; ++z) chan.at(x, z) /= cs;
        for (int y = 0; y < ny; ++y) ys += (py_x.at(x, y) = rng.uniform(0.05, 1.0));
        for (int y = 0; y < ny; ++y) py_x.at(x, y) /= ys;
    }
    for (double& v : px) v /= psum;

    // Oracle: build p(z,y) by the double sum and evaluate I directly.
    Matrix jzy(nz, ny);
    for (int x = 0; x < nx; ++x)
        for (int z = 0; z < nz; ++z)
            for (int y = 0; y < ny; ++y) jzy.at(z, y) += px[x] * chan.at(x, z) * py_x.at(x, y);
    Vector pz(nz, 0.0), py(ny, 0.0);
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y) {
            pz[z] += jzy.at(z, y);
            py[y] += jzy.at(z, y);
        }
    double oracle = 0.0;
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y) {
            const double j = jzy.at(z, y);
            if (j > 0.0) oracle += j * std::log2(j / (pz[z] * py[y]));
        }
    CHECK(std::abs(exact::layer_relevance(chan, px, py_x) - oracle) < 1e-12);
}

namespace {

exact::DiscreteJoint random_chain(std::uint64_t seed, int nx, int ny, int n1, int n2) {
    RngStream rng(seed);
    exact::DiscreteJoint dj;
    dj.pxy = Matrix(nx, ny);
    double sum = 0.0;
    for (double& v : dj.pxy.data) sum += (v = rng.uniform(0.01, 1.0));
    for (double& v : dj.pxy.data) v /= sum;
    dj.z1_given_x = Matrix(nx, n1);
    for (int x = 0; x < nx; ++x) {
        double s = 0.0;
        for (int z = 0; z < n1; ++z) s += (dj.z1_given_x.at(x, z) = rng.uniform(0.01, 1.0));
        for (int z = 0; z < n1; ++z) dj.z1_given_x.at(x, z) /= s;
    }
    dj.z2_given_z1 = Matrix(n1, n2);
    for (int z = 0; z < n1; ++z) {
        double s = 0.0;
        for (int w = 0; w < n2; ++w) s += (dj.z2_given_z1.at(z, w) = rng.uniform(0.01, 1.0));
        for (int w = 0; w < n2; ++w) dj.z2_given_z1.at(z, w) /= s;
    }
    return dj;
}

}  // namespace

TEST_CASE("lemma 1 residuals vanish on random chains") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto dj = random_chain(seed, 8, 4, 4, 4);
        const auto res = exact::lemma1_residuals(dj);
        CHECK(res.delta_x < 1e-10);
        CHECK(res.delta_y < 1e-10);
    }
}

TEST_CASE("lemma 1 with an identity second channel") {
    auto dj = random_chain(42, 4, 3, 3, 3);
    dj.z2_given_z1 = Matrix(3, 3);
    for (int z = 0; z < 3; ++z) dj.z2_given_z1.at(z, z) = 1.0;
    const auto res = exact::lemma1_residuals(dj);
    CHECK(res.delta_x < 1e-10);
    CHECK(res.delta_y < 1e-10);
}

TEST_CASE("exact vcr at layer zero equals the exact NLL") {
    const NetworkParams p = random_net(3, {3, 2}, 2, 11);
    const Matrix inputs = all_binary_patterns(3);
    Vector px(8, 1.0 / 8);
    Matrix py_x(8, 2);
    for (int x = 0; x < 8; ++x) py_x.at(x, (x * 3) % 2) = 1.0;
    CHECK(exact::exact_vcr_nats(p, inputs, px, py_x, 0) ==
          exact::exact_nll_nats(p, inputs, px, py_x));
}

TEST_CASE("variational bounds dominate their exact counterparts") {
    // H(Y|Z_l) <= H~(Y|Z_l) and I(Z_l;Z_{l-1}) <= I~(Z_l;Z_{l-1});
    // extreme-layer identity: H~(Y|Z_L) >= exact NLL.
    for (std::uint64_t seed = 21; seed <= 25; ++seed) {
        const NetworkParams p = random_net(3, {3, 2}, 2, seed);
        const Matrix inputs = all_binary_patterns(3);
        Vector px(8);
        RngStream rng(seed * 7);
        double sum = 0.0;
        for (double& v : px) sum += (v = rng.uniform(0.2, 1.0));
        for (double& v : px) v /= sum;
        Matrix py_x(8, 2);
        for (int x = 0; x < 8; ++x) {
            const double q = rng.uniform(0.1, 0.9);
            py_x.at(x, 0) = q;
            py_x.at(x, 1) = 1.0 - q;
        }
        for (int l = 1; l <= 2; ++l) {
            const double exact_h = exact::exact_cond_entropy_nats(p, inputs, px, py_x, l);
            const double vcr = exact::exact_vcr_nats(p, inputs, px, py_x, l);
            CHECK(exact_h <= vcr + 1e-10);
            const double mi = exact::exact_mi_zl_zprev_nats(p, inputs, px, l);
            const double comp = exact::exact_compression_nats(p, inputs, px, l);
            CHECK(mi <= comp + 1e-10);
        }
        const double nll = exact::exact_nll_nats(p, inputs, px, py_x);
        const double vcr_top = exact::exact_vcr_nats(p, inputs, px, py_x, 2);
        CHECK(vcr_top >= nll - 1e-10);
    }
}

TEST_CASE("monte-carlo estimates converge to the exact values at the 1/sqrt(M) rate") {
    const NetworkParams p = random_net(2, {2, 2}, 2, 31);
    const Matrix inputs = all_binary_patterns(2);
    const Vector px(4, 0.25);
    Matrix py_x(4, 2);
    for (int x = 0; x < 4; ++x) py_x.at(x, x % 2) = 1.0;

    const double exact_vcr1 = exact::exact_vcr_nats(p, inputs, px, py_x, 1);
    const double exact_comp2 = exact::exact_compression_nats(p, inputs, px, 2);

    auto rmse_at = [&](int m, int reps) {
        double se_vcr = 0.0, se_comp = 0.0;
        for (int rep = 0; rep < reps; ++rep) {
            double vcr = 0.0, comp = 0.0;
            for (int x = 0; x < 4; ++x) {
                RngStream rng = RngStream::derive(900 + rep, m, x);
                const ParticleCloud c = grow_particles(p, inputs.row(x), m, Growth::tree, rng,
                                                       std::size_t{1} << 22);
                vcr += vcr_term(c, p, 1, x % 2).nats;
                comp += compression_term(c, p, 2);
            }
            vcr /= 4.0;
            comp /= 4.0;
            se_vcr += (vcr - exact_vcr1) * (vcr - exact_vcr1);
            se_comp += (comp - exact_comp2) * (comp - exact_comp2);
        }
        return std::pair{std::sqrt(se_vcr / reps), std::sqrt(se_comp / reps)};
    };

    // tree growth: M per layer -> M^2 particles at the top (1e2, 1e4, 1e6)
    // The compression estimate at layer 2 averages over the M layer-1
    // states, so its error scales as 1/sqrt(M) (10x over this ladder); the
    // relevance estimate improves faster thanks to the inner averages.
    const auto [v10, c10] = rmse_at(10, 12);
    const auto [v100, c100] = rmse_at(100, 12);
    const auto [v1000, c1000] = rmse_at(1000, 6);
    CHECK(v10 > v100);
    CHECK(v100 > v1000);
    CHECK(c10 > c100);
    CHECK(c100 > c1000);
    CHECK(v10 / v1000 > 10.0);
    CHECK(c10 / c1000 > 4.5);
    CHECK(v1000 < 0.02);
    CHECK(c1000 < 0.02);
}

TEST_CASE("conflict probe: sufficient-statistic and independence constructions") {
    const Matrix pxy = exact::builtin_probe_joint();
    exact::ProbeConfig cfg;
    cfg.grid = 9;

    cfg.mode = exact::Channel2Mode::fixed_copy;
    const auto rep_a = exact::conflict_probe(pxy, cfg);
    CHECK(rep_a.verdict == "non-conflicting (condition a)");
    CHECK_FALSE(rep_a.conflicting);

    cfg.mode = exact::Channel2Mode::constant_family;
    const auto rep_b = exact::conflict_probe(pxy, cfg);
    CHECK(rep_b.verdict == "non-conflicting (condition b)");
    CHECK_FALSE(rep_b.conflicting);
}

TEST_CASE("conflict probe: generic instance at a coarse grid") {
    const Matrix pxy = exact::builtin_probe_joint();
    exact::ProbeConfig cfg;
    cfg.grid = 9;
    cfg.mode = exact::Channel2Mode::full_grid;
    const auto rep = exact::conflict_probe(pxy, cfg);
    CHECK_FALSE(rep.inconclusive);
    CHECK(rep.argmin1_count >= 1);
    CHECK(rep.argmin2_count >= 1);
    CHECK(rep.witness1_encoder.size() == 4);
    CHECK(rep.witness2_encoder.size() == 4);
    const std::string json = rep.to_json();
    CHECK(json.find("verdict") != std::string::npos);
}

TEST_CASE("conflict probe requires noisy labels") {
    Matrix pxy(2, 2);
    pxy.at(0, 0) = 0.5;
    pxy.at(1, 1) = 0.5;  // H(Y|X) = 0
    exact::ProbeConfig cfg;
    CHECK_THROWS_AS(exact::conflict_probe(pxy, cfg), std::invalid_argument);
}

TEST_CASE("info plane: near-constant encoders carry almost no information") {
    NetworkParams p = random_net(4, {4, 3}, 2, 41);
    for (auto& lp : p.layers) {
        for (double& v : lp.W.data) v *= 1e-6;
        for (double& v : lp.b) v *= 1e-6;
    }
    const Matrix inputs = all_binary_patterns(4);
    const Vector px(16, 1.0 / 16);
    Matrix py_x(16, 2);
    for (int x = 0; x < 16; ++x) py_x.at(x, x % 2) = 1.0;
    const std::pair<int, const NetworkParams*> cp{0, &p};
    const auto res = exact::info_plane_trace({&cp, 1}, inputs, px, py_x);
    REQUIRE(res.points.size() == 2);
    for (const auto& pt : res.points) {
        CHECK(pt.i_zx_bits <= 0.01);
        CHECK(pt.i_zy_bits <= 0.01);
        CHECK(pt.i_zy_bits <= pt.i_zx_bits + 1e-9);
    }
    CHECK(res.dpi_violations.empty());
}

TEST_CASE("info plane: lossless deterministic codes reach H(X) = 12 bits") {
    NetworkParams p = random_net(12, {12}, 2, 43);
    p.layers[0].W = Matrix(12, 12);
    for (int i = 0; i < 12; ++i) p.layers[0].W.at(i, i) = 1000.0;
    p.layers[0].b.assign(12, -500.0);
    const Matrix inputs = all_binary_patterns(12);
    const Vector px(4096, 1.0 / 4096);
    exact::Budget budget;
    budget.max_table_entries = std::size_t{1} << 25;
    const auto dists = exact::propagate_exact(p, inputs, budget);
    CHECK(exact::mutual_info(dists[0].p, px) == doctest::Approx(12.0).epsilon(1e-9));
}
