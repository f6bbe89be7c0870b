#include "imb/exact.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "imb/math.hpp"
#include "imb/objectives.hpp"
#include "imb/parallel.hpp"

namespace imb::exact {

namespace {

Matrix matmul(const Matrix& a, const Matrix& b) {
    check_dim(a.cols == b.rows, "matmul");
    Matrix c(a.rows, b.cols);
    parallel_for_blocks(static_cast<std::size_t>(a.rows), 16,
                        [&](std::size_t, std::size_t lo, std::size_t hi) {
                            for (std::size_t r = lo; r < hi; ++r) {
                                const double* arow = a.data.data() + r * a.cols;
                                double* crow = c.data.data() + r * b.cols;
                                for (int k = 0; k < a.cols; ++k) {
                                    const double av = arow[k];
                                    if (av == 0.0) continue;
                                    const double* brow = b.data.data() +
                                                         static_cast<std::size_t>(k) * b.cols;
                                    for (int j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
                                }
                            }
                        });
    return c;
}

// Product over units of Bern(bit_i(state); probs_i), for every state.
void fill_state_products(std::span<const double> probs, std::span<double> out) {
    const int n = static_cast<int>(probs.size());
    out[0] = 1.0;
    std::size_t filled = 1;
    for (int i = 0; i < n; ++i) {
        const double p1 = probs[i];
        const double p0 = 1.0 - p1;
        for (std::size_t s = 0; s < filled; ++s) {
            out[filled + s] = out[s] * p1;
            out[s] *= p0;
        }
        filled *= 2;
    }
}

double mi_nats_from_conditional(const Matrix& p, std::span<const double> weights) {
    // marginal m(z) = sum_x w(x) p(z|x)
    Vector m(p.cols, 0.0);
    for (int r = 0; r < p.rows; ++r) {
        const double w = weights[r];
        if (w == 0.0) continue;
        const double* row = p.data.data() + static_cast<std::size_t>(r) * p.cols;
        for (int c = 0; c < p.cols; ++c) m[c] += w * row[c];
    }
    Vector partial(p.rows, 0.0);
    parallel_for_blocks(static_cast<std::size_t>(p.rows), 64,
                        [&](std::size_t, std::size_t lo, std::size_t hi) {
                            for (std::size_t r = lo; r < hi; ++r) {
                                const double* row = p.data.data() + r * p.cols;
                                double acc = 0.0;
                                for (int c = 0; c < p.cols; ++c) {
                                    if (row[c] > 0.0) acc += row[c] * std::log(row[c] / m[c]);
                                }
                                partial[r] = acc;
                            }
                        });
    double total = 0.0;
    for (int r = 0; r < p.rows; ++r) total += weights[r] * partial[r];
    return total;
}

void check_distribution(std::span<const double> p, const std::string& what) {
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::invalid_argument(what + ": negative or non-finite probability");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument(what + ": probabilities sum to " + std::to_string(sum));
}

}  // namespace

Vector state_bits(std::size_t state, int n_units) {
    Vector z(n_units);
    for (int i = 0; i < n_units; ++i) z[i] = static_cast<double>((state >> i) & 1u);
    return z;
}

Matrix build_transition(const NetworkParams& params, int l) {
    if (l < 2 || l > params.n_layers())
        throw std::invalid_argument("build_transition: layer " + std::to_string(l));
    const std::size_t s_prev = std::size_t{1} << params.width(l - 1);
    const std::size_t s_cur = std::size_t{1} << params.width(l);
    Matrix t(static_cast<int>(s_prev), static_cast<int>(s_cur));
    parallel_for_blocks(s_prev, 32, [&](std::size_t, std::size_t lo, std::size_t hi) {
        for (std::size_t sp = lo; sp < hi; ++sp) {
            const Vector z_prev = state_bits(sp, params.width(l - 1));
            const BernoulliVector bv = layer_forward(params, l, z_prev);
            fill_state_products(bv.probs, t.row(static_cast<int>(sp)));
        }
    });
    return t;
}

Matrix head_table(const NetworkParams& params) {
    const int n_top = params.width(params.n_layers());
    const std::size_t s_top = std::size_t{1} << n_top;
    Matrix q(static_cast<int>(s_top), params.n_classes());
    parallel_for_blocks(s_top, 64, [&](std::size_t, std::size_t lo, std::size_t hi) {
        for (std::size_t s = lo; s < hi; ++s) {
            const Vector probs = head_forward(params, state_bits(s, n_top));
            for (int j = 0; j < params.n_classes(); ++j) q.at(static_cast<int>(s), j) = probs[j];
        }
    });
    return q;
}

std::vector<ExactLayerDistribution> propagate_exact(const NetworkParams& params,
                                                    const Matrix& inputs, Budget budget) {
    params.validate();
    if (inputs.cols != params.input_dim) throw std::invalid_argument("propagate_exact: input width");
    const int n_layers = params.n_layers();
    for (int l = 1; l <= n_layers; ++l) {
        if (params.width(l) >= 63 ||
            (std::size_t{1} << params.width(l)) > budget.max_states_per_layer)
            throw std::runtime_error("propagate_exact: layer " + std::to_string(l) + " has 2^" +
                                     std::to_string(params.width(l)) +
                                     " states, budget allows " +
                                     std::to_string(budget.max_states_per_layer));
        const std::size_t entries =
            static_cast<std::size_t>(inputs.rows) * (std::size_t{1} << params.width(l));
        if (entries > budget.max_table_entries)
            throw std::runtime_error("propagate_exact: layer " + std::to_string(l) + " table has " +
                                     std::to_string(entries) + " entries, budget allows " +
                                     std::to_string(budget.max_table_entries));
    }

    std::vector<ExactLayerDistribution> out;
    out.reserve(n_layers);

    ExactLayerDistribution d1;
    d1.layer = 1;
    d1.p = Matrix(inputs.rows, static_cast<int>(std::size_t{1} << params.width(1)));
    parallel_for_blocks(static_cast<std::size_t>(inputs.rows), 32,
                        [&](std::size_t, std::size_t lo, std::size_t hi) {
                            for (std::size_t r = lo; r < hi; ++r) {
                                const BernoulliVector bv =
                                    layer_forward(params, 1, inputs.row(static_cast<int>(r)));
                                fill_state_products(bv.probs, d1.p.row(static_cast<int>(r)));
                            }
                        });
    out.push_back(std::move(d1));

    for (int l = 2; l <= n_layers; ++l) {
        const Matrix t = build_transition(params, l);
        ExactLayerDistribution dl;
        dl.layer = l;
        dl.p = matmul(out.back().p, t);
        out.push_back(std::move(dl));
    }
    return out;
}

double mutual_info(const Matrix& p_z_given_x, std::span<const double> px) {
    if (static_cast<int>(px.size()) != p_z_given_x.rows)
        throw std::invalid_argument("mutual_info: px size");
    check_distribution(px, "mutual_info px");
    for (int r = 0; r < p_z_given_x.rows; ++r) check_distribution(p_z_given_x.row(r), "mutual_info row");
    const double nats = mi_nats_from_conditional(p_z_given_x, px);
    const double bits = nats * kNatsToBits;
    if (bits < -1e-12) throw std::runtime_error("mutual_info: negative beyond tolerance");
    return bits < 0.0 ? 0.0 : bits;
}

double layer_relevance(const Matrix& p_z_given_x, std::span<const double> px,
                       const Matrix& py_given_x) {
    if (py_given_x.rows != p_z_given_x.rows || static_cast<int>(px.size()) != p_z_given_x.rows)
        throw std::invalid_argument("layer_relevance: alphabet mismatch");
    const int n_y = py_given_x.cols;
    Vector py(n_y, 0.0);
    for (int x = 0; x < py_given_x.rows; ++x)
        for (int y = 0; y < n_y; ++y) py[y] += px[x] * py_given_x.at(x, y);

    Matrix p_z_given_y(n_y, p_z_given_x.cols);
    for (int y = 0; y < n_y; ++y) {
        if (py[y] <= 0.0) continue;
        for (int x = 0; x < p_z_given_x.rows; ++x) {
            const double w = px[x] * py_given_x.at(x, y) / py[y];
            if (w == 0.0) continue;
            const double* row = p_z_given_x.data.data() +
                                static_cast<std::size_t>(x) * p_z_given_x.cols;
            double* orow = p_z_given_y.data.data() +
                           static_cast<std::size_t>(y) * p_z_given_y.cols;
            for (int c = 0; c < p_z_given_x.cols; ++c) orow[c] += w * row[c];
        }
    }
    return mutual_info(p_z_given_y, py);
}

double entropy_bits(std::span<const double> p) {
    double h = 0.0;
    for (double v : p) h -= xlogx(v);
    return h * kNatsToBits;
}

// ---- exact objective counterparts ----

namespace {

// Kernel p(z_L | z_l) as a matrix; identity for l = L.
Matrix kernel_to_top(const NetworkParams& params, int l) {
    const int n_layers = params.n_layers();
    if (l == n_layers) {
        const std::size_t s = std::size_t{1} << params.width(n_layers);
        Matrix k(static_cast<int>(s), static_cast<int>(s));
        for (std::size_t i = 0; i < s; ++i) k.at(static_cast<int>(i), static_cast<int>(i)) = 1.0;
        return k;
    }
    Matrix k = build_transition(params, l + 1);
    for (int j = l + 2; j <= n_layers; ++j) k = matmul(k, build_transition(params, j));
    return k;
}

double floored_log(double v) { return std::log(v < kProbFloor ? kProbFloor : v); }

}  // namespace

double exact_nll_nats(const NetworkParams& params, const Matrix& inputs,
                      std::span<const double> px, const Matrix& py_given_x) {
    const auto dists = propagate_exact(params, inputs);
    const Matrix q = head_table(params);
    const Matrix pred = matmul(dists.back().p, q);  // [N x classes]
    double nll = 0.0;
    for (int x = 0; x < inputs.rows; ++x) {
        for (int y = 0; y < py_given_x.cols; ++y) {
            const double w = px[x] * py_given_x.at(x, y);
            if (w > 0.0) nll -= w * floored_log(pred.at(x, y));
        }
    }
    return nll;
}

double exact_vcr_nats(const NetworkParams& params, const Matrix& inputs,
                      std::span<const double> px, const Matrix& py_given_x, int l) {
    if (l == 0) return exact_nll_nats(params, inputs, px, py_given_x);
    const auto dists = propagate_exact(params, inputs);
    const Matrix decoder = matmul(kernel_to_top(params, l), head_table(params));  // [S_l x Y]
    const Matrix& pl = dists[l - 1].p;
    double vcr = 0.0;
    for (int x = 0; x < inputs.rows; ++x) {
        const double* prow = pl.data.data() + static_cast<std::size_t>(x) * pl.cols;
        for (int y = 0; y < py_given_x.cols; ++y) {
            const double w = px[x] * py_given_x.at(x, y);
            if (w == 0.0) continue;
            double acc = 0.0;
            for (int z = 0; z < pl.cols; ++z) {
                if (prow[z] > 0.0) acc += prow[z] * floored_log(decoder.at(z, y));
            }
            vcr -= w * acc;
        }
    }
    return vcr;
}

double exact_cond_entropy_nats(const NetworkParams& params, const Matrix& inputs,
                               std::span<const double> px, const Matrix& py_given_x, int l) {
    if (l < 0 || l > params.n_layers()) throw std::invalid_argument("exact_cond_entropy: layer");
    const int n_y = py_given_x.cols;
    if (l == 0) {
        // H(Y|X) directly from the data joint.
        double h = 0.0;
        for (int x = 0; x < inputs.rows; ++x) {
            for (int y = 0; y < n_y; ++y) {
                const double pyx = py_given_x.at(x, y);
                if (pyx > 0.0 && px[x] > 0.0) h -= px[x] * pyx * std::log(pyx);
            }
        }
        return h;
    }
    const auto dists = propagate_exact(params, inputs);
    const Matrix& pl = dists[l - 1].p;
    Matrix joint(n_y, pl.cols);  // p(y, z_l)
    for (int x = 0; x < inputs.rows; ++x) {
        const double* prow = pl.data.data() + static_cast<std::size_t>(x) * pl.cols;
        for (int y = 0; y < n_y; ++y) {
            const double w = px[x] * py_given_x.at(x, y);
            if (w == 0.0) continue;
            double* jrow = joint.data.data() + static_cast<std::size_t>(y) * joint.cols;
            for (int z = 0; z < pl.cols; ++z) jrow[z] += w * prow[z];
        }
    }
    Vector pz(pl.cols, 0.0);
    for (int y = 0; y < n_y; ++y)
        for (int z = 0; z < pl.cols; ++z) pz[z] += joint.at(y, z);
    double h = 0.0;
    for (int y = 0; y < n_y; ++y) {
        for (int z = 0; z < pl.cols; ++z) {
            const double j = joint.at(y, z);
            if (j > 0.0) h -= j * std::log(j / pz[z]);
        }
    }
    return h;
}

double exact_compression_nats(const NetworkParams& params, const Matrix& inputs,
                              std::span<const double> px, int l) {
    if (l < 1 || l > params.n_layers()) throw std::invalid_argument("exact_compression: layer");
    const Vector& rho = params.layers[l - 1].r_logits;
    Vector r(rho.size());
    for (std::size_t i = 0; i < rho.size(); ++i) r[i] = sigmoid(rho[i]);

    auto kl_of_state = [&](std::span<const double> z_prev) {
        const BernoulliVector bv = layer_forward(params, l, z_prev);
        double kl = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) kl += bernoulli_kl(bv.probs[i], r[i]);
        return kl;
    };

    if (l == 1) {
        double acc = 0.0;
        for (int x = 0; x < inputs.rows; ++x) acc += px[x] * kl_of_state(inputs.row(x));
        return acc;
    }
    const auto dists = propagate_exact(params, inputs);
    const Matrix& prev = dists[l - 2].p;
    Vector pz(prev.cols, 0.0);
    for (int x = 0; x < prev.rows; ++x) {
        const double* row = prev.data.data() + static_cast<std::size_t>(x) * prev.cols;
        for (int z = 0; z < prev.cols; ++z) pz[z] += px[x] * row[z];
    }
    double acc = 0.0;
    for (int z = 0; z < prev.cols; ++z) {
        if (pz[z] > 0.0) acc += pz[z] * kl_of_state(state_bits(z, params.width(l - 1)));
    }
    return acc;
}

double exact_mi_zl_zprev_nats(const NetworkParams& params, const Matrix& inputs,
                              std::span<const double> px, int l) {
    if (l < 1 || l > params.n_layers()) throw std::invalid_argument("exact_mi_zl_zprev: layer");
    const auto dists = propagate_exact(params, inputs);
    if (l == 1) return mi_nats_from_conditional(dists[0].p, px);
    const Matrix& prev = dists[l - 2].p;
    Vector pz(prev.cols, 0.0);
    for (int x = 0; x < prev.rows; ++x) {
        const double* row = prev.data.data() + static_cast<std::size_t>(x) * prev.cols;
        for (int z = 0; z < prev.cols; ++z) pz[z] += px[x] * row[z];
    }
    const Matrix t = build_transition(params, l);
    return mi_nats_from_conditional(t, pz);
}

// ---- small discrete systems ----

void DiscreteJoint::validate() const {
    check_distribution(pxy.data, "DiscreteJoint pxy");
    if (z1_given_x.rows != pxy.rows) throw std::invalid_argument("DiscreteJoint: z1 rows");
    if (z2_given_z1.rows != z1_given_x.cols) throw std::invalid_argument("DiscreteJoint: z2 rows");
    for (int x = 0; x < z1_given_x.rows; ++x) check_distribution(z1_given_x.row(x), "p(z1|x)");
    for (int z = 0; z < z2_given_z1.rows; ++z) check_distribution(z2_given_z1.row(z), "p(z2|z1)");
}

Lemma1Residuals lemma1_residuals(const DiscreteJoint& dj) {
    dj.validate();
    const int nx = dj.pxy.rows, ny = dj.pxy.cols;
    const int n1 = dj.z1_given_x.cols, n2 = dj.z2_given_z1.cols;

    Vector px(nx, 0.0);
    for (int x = 0; x < nx; ++x)
        for (int y = 0; y < ny; ++y) px[x] += dj.pxy.at(x, y);

    auto mi_pair = [](const Matrix& joint) {
        // I from a full joint table, nats.
        Vector pa(joint.rows, 0.0), pb(joint.cols, 0.0);
        for (int a = 0; a < joint.rows; ++a)
            for (int b = 0; b < joint.cols; ++b) {
                pa[a] += joint.at(a, b);
                pb[b] += joint.at(a, b);
            }
        double mi = 0.0;
        for (int a = 0; a < joint.rows; ++a)
            for (int b = 0; b < joint.cols; ++b) {
                const double j = joint.at(a, b);
                if (j > 0.0) mi += j * std::log(j / (pa[a] * pb[b]));
            }
        return mi;
    };

    // I(Z1;V) and I(Z2;V) for V in {X, Y}.
    Matrix j_xz1(nx, n1), j_xz2(nx, n2), j_yz1(ny, n1), j_yz2(ny, n2);
    for (int x = 0; x < nx; ++x) {
        for (int z1 = 0; z1 < n1; ++z1) {
            const double w1 = dj.z1_given_x.at(x, z1);
            j_xz1.at(x, z1) += px[x] * w1;
            for (int y = 0; y < ny; ++y) j_yz1.at(y, z1) += dj.pxy.at(x, y) * w1;
            for (int z2 = 0; z2 < n2; ++z2) {
                const double w2 = w1 * dj.z2_given_z1.at(z1, z2);
                j_xz2.at(x, z2) += px[x] * w2;
                for (int y = 0; y < ny; ++y) j_yz2.at(y, z2) += dj.pxy.at(x, y) * w2;
            }
        }
    }

    // Conditional I(Z1;V|Z2) by direct summation over the chain joint.
    Vector pz2(n2, 0.0);
    Matrix j_z1z2(n1, n2);
    for (int x = 0; x < nx; ++x)
        for (int z1 = 0; z1 < n1; ++z1)
            for (int z2 = 0; z2 < n2; ++z2) {
                const double j = px[x] * dj.z1_given_x.at(x, z1) * dj.z2_given_z1.at(z1, z2);
                j_z1z2.at(z1, z2) += j;
                pz2[z2] += j;
            }

    auto cond_mi = [&](bool use_y) {
        const int na = use_y ? ny : nx;
        double mi = 0.0;
        for (int z2 = 0; z2 < n2; ++z2) {
            if (pz2[z2] == 0.0) continue;
            // p(v, z1, z2) for this z2
            Matrix j(na, n1);
            for (int x = 0; x < nx; ++x)
                for (int z1 = 0; z1 < n1; ++z1) {
                    const double base = dj.z1_given_x.at(x, z1) * dj.z2_given_z1.at(z1, z2);
                    if (base == 0.0) continue;
                    if (use_y) {
                        for (int y = 0; y < ny; ++y) j.at(y, z1) += dj.pxy.at(x, y) * base;
                    } else {
                        j.at(x, z1) += px[x] * base;
                    }
                }
            Vector pa(na, 0.0), pb(n1, 0.0);
            for (int a = 0; a < na; ++a)
                for (int b = 0; b < n1; ++b) {
                    pa[a] += j.at(a, b);
                    pb[b] += j.at(a, b);
                }
            for (int a = 0; a < na; ++a)
                for (int b = 0; b < n1; ++b) {
                    const double v = j.at(a, b);
                    if (v > 0.0) mi += v * std::log(v * pz2[z2] / (pa[a] * pb[b]));
                }
        }
        return mi;
    };

    Lemma1Residuals res;
    res.delta_x = std::abs(mi_pair(j_xz2) - (mi_pair(j_xz1) - cond_mi(false)));
    res.delta_y = std::abs(mi_pair(j_yz2) - (mi_pair(j_yz1) - cond_mi(true)));
    return res;
}

Matrix builtin_probe_joint() {
    // |X| = 4 with non-uniform p(x); labels {0,1,0,1} flipped with
    // probability 0.1 so H(Y|X) > 0.
    const double eps = 0.1;
    const Vector px = {0.4, 0.3, 0.2, 0.1};
    Matrix pxy(4, 2);
    for (int x = 0; x < 4; ++x) {
        const int base = x % 2;
        pxy.at(x, base) = px[x] * (1.0 - eps);
        pxy.at(x, 1 - base) = px[x] * eps;
    }
    return pxy;
}

namespace {

struct ProbeEval {
    double l1 = 0.0;
    Vector l2;  // one per channel
};

struct ChannelGrid {
    std::vector<std::pair<double, double>> channels;  // (c0, c1)
};

ChannelGrid make_channels(const ProbeConfig& cfg) {
    ChannelGrid g;
    const int n = cfg.grid;
    auto tick = [&](int i) { return static_cast<double>(i) / (n - 1); };
    switch (cfg.mode) {
        case Channel2Mode::fixed_copy:
            g.channels.push_back({0.0, 1.0});
            break;
        case Channel2Mode::constant_family:
            for (int i = 0; i < n; ++i) g.channels.push_back({tick(i), tick(i)});
            break;
        case Channel2Mode::full_grid:
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) g.channels.push_back({tick(i), tick(j)});
            break;
    }
    return g;
}

}  // namespace

ProbeReport conflict_probe(const Matrix& pxy, const ProbeConfig& cfg) {
    const int nx = pxy.rows, ny = pxy.cols;
    if (nx > 4 || ny > 4) throw std::invalid_argument("conflict_probe: alphabets too large");
    if (cfg.grid < 2) throw std::invalid_argument("conflict_probe: grid must be >= 2");
    check_distribution(pxy.data, "conflict_probe pxy");
    if (!(cfg.beta1 > 0.0) || !(cfg.beta2 > 0.0))
        throw std::invalid_argument("conflict_probe: betas must be positive");

    Vector px(nx, 0.0), py(ny, 0.0);
    for (int x = 0; x < nx; ++x)
        for (int y = 0; y < ny; ++y) {
            px[x] += pxy.at(x, y);
            py[y] += pxy.at(x, y);
        }
    // The probe is only meaningful with noisy labels.
    double h_y_given_x = 0.0;
    for (int x = 0; x < nx; ++x)
        for (int y = 0; y < ny; ++y) {
            const double j = pxy.at(x, y);
            if (j > 0.0) h_y_given_x -= j * std::log(j / px[x]);
        }
    if (h_y_given_x <= 1e-12)
        throw std::invalid_argument("conflict_probe: H(Y|X) must be positive");

    const ChannelGrid channels = make_channels(cfg);
    const int g = cfg.grid;
    std::size_t n_enc = 1;
    for (int x = 0; x < nx; ++x) n_enc *= static_cast<std::size_t>(g);
    const std::size_t n_ch = channels.channels.size();

    auto encoder_of = [&](std::size_t e, Vector& p1) {
        for (int x = 0; x < nx; ++x) {
            p1[x] = static_cast<double>(e % g) / (g - 1);
            e /= g;
        }
    };

    auto eval_l1 = [&](const Vector& p1, double& m1, Vector& j1) {
        m1 = 0.0;
        for (int x = 0; x < nx; ++x) m1 += px[x] * p1[x];
        double ix = 0.0;
        for (int x = 0; x < nx; ++x)
            ix += px[x] * (xlogx_over(p1[x], m1) + xlogx_over(1.0 - p1[x], 1.0 - m1));
        double iy = 0.0;
        for (int y = 0; y < ny; ++y) {
            j1[y] = 0.0;
            for (int x = 0; x < nx; ++x) j1[y] += pxy.at(x, y) * p1[x];
            iy += xlogx_over(j1[y], py[y] * m1) +
                  xlogx_over(std::max(0.0, py[y] - j1[y]), py[y] * (1.0 - m1));
        }
        return ix - cfg.beta1 * iy;
    };

    // Complement probabilities are formed from (1-c) directly, never by
    // subtracting the positive side: a rounding residue next to an exactly
    // saturated channel would otherwise produce log(x/0) = inf.
    auto eval_l2 = [&](const Vector& p1, double m1, const Vector& j1, double c0, double c1) {
        const double d0 = 1.0 - c0, d1 = 1.0 - c1;
        const double m2 = m1 * c1 + (1.0 - m1) * c0;
        const double m2c = m1 * d1 + (1.0 - m1) * d0;
        double ix = 0.0;
        for (int x = 0; x < nx; ++x) {
            const double p2 = p1[x] * c1 + (1.0 - p1[x]) * c0;
            const double p2c = p1[x] * d1 + (1.0 - p1[x]) * d0;
            ix += px[x] * (xlogx_over(p2, m2) + xlogx_over(p2c, m2c));
        }
        double iy = 0.0;
        for (int y = 0; y < ny; ++y) {
            const double j1c = std::max(0.0, py[y] - j1[y]);
            const double j2 = j1[y] * c1 + j1c * c0;
            const double j2c = j1[y] * d1 + j1c * d0;
            iy += xlogx_over(j2, py[y] * m2) + xlogx_over(j2c, py[y] * m2c);
        }
        return ix - cfg.beta2 * iy;
    };

    // Pass 1: global minima and ranges.
    struct BlockStat {
        double min1 = 1e300, max1 = -1e300, min2 = 1e300, max2 = -1e300;
    };
    const std::size_t block_size = 1024;
    std::vector<BlockStat> stats((n_enc + block_size - 1) / block_size);
    parallel_for_blocks(n_enc, block_size, [&](std::size_t b, std::size_t lo, std::size_t hi) {
        BlockStat st;
        Vector p1(nx), j1(ny);
        for (std::size_t e = lo; e < hi; ++e) {
            encoder_of(e, p1);
            double m1;
            const double l1 = eval_l1(p1, m1, j1);
            if (!std::isfinite(l1)) throw std::runtime_error("conflict_probe: non-finite L1");
            st.min1 = std::min(st.min1, l1);
            st.max1 = std::max(st.max1, l1);
            for (const auto& [c0, c1] : channels.channels) {
                const double l2 = eval_l2(p1, m1, j1, c0, c1);
                if (!std::isfinite(l2)) throw std::runtime_error("conflict_probe: non-finite L2");
                st.min2 = std::min(st.min2, l2);
                st.max2 = std::max(st.max2, l2);
            }
        }
        stats[b] = st;
    });
    BlockStat all;
    for (const auto& st : stats) {
        all.min1 = std::min(all.min1, st.min1);
        all.max1 = std::max(all.max1, st.max1);
        all.min2 = std::min(all.min2, st.min2);
        all.max2 = std::max(all.max2, st.max2);
    }

    ProbeReport rep;
    rep.min_l1 = all.min1;
    rep.min_l2 = all.min2;
    rep.tol1 = cfg.tol_scale * (all.max1 - all.min1);
    rep.tol2 = cfg.tol_scale * (all.max2 - all.min2);
    rep.grid_pairs = n_enc * n_ch;

    // Pass 2: argmin membership, witnesses (lowest index), intersection.
    struct BlockHits {
        std::size_t count1 = 0, count2 = 0;
        std::size_t w1 = SIZE_MAX;                    // encoder index
        std::size_t w2_e = SIZE_MAX, w2_c = SIZE_MAX;  // pair
        std::size_t joint_e = SIZE_MAX, joint_c = SIZE_MAX;
    };
    std::vector<BlockHits> hits((n_enc + block_size - 1) / block_size);
    parallel_for_blocks(n_enc, block_size, [&](std::size_t b, std::size_t lo, std::size_t hi) {
        BlockHits h;
        Vector p1(nx), j1(ny);
        for (std::size_t e = lo; e < hi; ++e) {
            encoder_of(e, p1);
            double m1;
            const double l1 = eval_l1(p1, m1, j1);
            const bool in1 = l1 <= all.min1 + rep.tol1;
            if (in1) {
                h.count1 += n_ch;
                if (h.w1 == SIZE_MAX) h.w1 = e;
            }
            for (std::size_t c = 0; c < n_ch; ++c) {
                const double l2 = eval_l2(p1, m1, j1, channels.channels[c].first,
                                          channels.channels[c].second);
                if (l2 <= all.min2 + rep.tol2) {
                    ++h.count2;
                    if (h.w2_e == SIZE_MAX) {
                        h.w2_e = e;
                        h.w2_c = c;
                    }
                    if (in1 && h.joint_e == SIZE_MAX) {
                        h.joint_e = e;
                        h.joint_c = c;
                    }
                }
            }
        }
        hits[b] = h;
    });
    BlockHits agg;
    for (const auto& h : hits) {
        agg.count1 += h.count1;
        agg.count2 += h.count2;
        if (h.w1 < agg.w1) agg.w1 = h.w1;
        if (h.w2_e < agg.w2_e || (h.w2_e == agg.w2_e && h.w2_c < agg.w2_c)) {
            agg.w2_e = h.w2_e;
            agg.w2_c = h.w2_c;
        }
        if (h.joint_e < agg.joint_e || (h.joint_e == agg.joint_e && h.joint_c < agg.joint_c)) {
            agg.joint_e = h.joint_e;
            agg.joint_c = h.joint_c;
        }
    }
    rep.argmin1_count = agg.count1;
    rep.argmin2_count = agg.count2;

    Vector p1(nx);
    if (agg.w1 != SIZE_MAX) {
        encoder_of(agg.w1, p1);
        rep.witness1_encoder = p1;
    }
    if (agg.w2_e != SIZE_MAX) {
        encoder_of(agg.w2_e, p1);
        rep.witness2_encoder = p1;
        rep.witness2_channel = {channels.channels[agg.w2_c].first,
                                channels.channels[agg.w2_c].second};
    }
    const bool intersect = agg.joint_e != SIZE_MAX;
    if (intersect) {
        encoder_of(agg.joint_e, p1);
        rep.joint_witness_encoder = p1;
        rep.joint_witness_channel = Vector{channels.channels[agg.joint_c].first,
                                           channels.channels[agg.joint_c].second};
    }

    switch (cfg.mode) {
        case Channel2Mode::fixed_copy:
            rep.conflicting = !intersect;
            rep.verdict = intersect ? "non-conflicting (condition a)" : "conflicting";
            break;
        case Channel2Mode::constant_family:
            // exact constancy up to rounding residue (~1e-16); real objective
            // ranges on these alphabets are >= 1e-3
            if (all.max2 - all.min2 <= 1e-12) {
                rep.conflicting = false;
                rep.verdict = "non-conflicting (condition b)";
            } else {
                rep.conflicting = !intersect;
                rep.verdict = intersect ? "non-conflicting" : "conflicting";
            }
            break;
        case Channel2Mode::full_grid:
            if (rep.argmin1_count == rep.grid_pairs || rep.argmin2_count == rep.grid_pairs) {
                rep.inconclusive = true;
                rep.verdict = "inconclusive (grid too coarse)";
            } else {
                rep.conflicting = !intersect;
                rep.verdict = intersect ? "non-conflicting" : "conflicting";
            }
            break;
    }
    return rep;
}

namespace {

void json_number(std::string& s, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    s += buf;
}

void json_vector(std::string& s, const Vector& v) {
    s += "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        json_number(s, v[i]);
    }
    s += "]";
}

}  // namespace

std::string ProbeReport::to_json() const {
    std::string s = "{\n  \"verdict\": \"" + verdict + "\",\n";
    s += "  \"conflicting\": " + std::string(conflicting ? "true" : "false") + ",\n";
    s += "  \"inconclusive\": " + std::string(inconclusive ? "true" : "false") + ",\n";
    s += "  \"min_l1\": ";
    json_number(s, min_l1);
    s += ",\n  \"min_l2\": ";
    json_number(s, min_l2);
    s += ",\n  \"tol1\": ";
    json_number(s, tol1);
    s += ",\n  \"tol2\": ";
    json_number(s, tol2);
    s += ",\n  \"argmin1_count\": " + std::to_string(argmin1_count);
    s += ",\n  \"argmin2_count\": " + std::to_string(argmin2_count);
    s += ",\n  \"grid_pairs\": " + std::to_string(grid_pairs);
    s += ",\n  \"witness1_encoder\": ";
    json_vector(s, witness1_encoder);
    s += ",\n  \"witness2_encoder\": ";
    json_vector(s, witness2_encoder);
    s += ",\n  \"witness2_channel\": ";
    json_vector(s, witness2_channel);
    if (joint_witness_encoder) {
        s += ",\n  \"joint_witness_encoder\": ";
        json_vector(s, *joint_witness_encoder);
        s += ",\n  \"joint_witness_channel\": ";
        json_vector(s, *joint_witness_channel);
    }
    s += "\n}\n";
    return s;
}

InfoPlaneResult info_plane_trace(std::span<const std::pair<int, const NetworkParams*>> checkpoints,
                                 const Matrix& inputs, std::span<const double> px,
                                 const Matrix& py_given_x, Budget budget) {
    InfoPlaneResult res;
    const double hx = entropy_bits(px);
    Vector py(py_given_x.cols, 0.0);
    for (int x = 0; x < py_given_x.rows; ++x)
        for (int y = 0; y < py_given_x.cols; ++y) py[y] += px[x] * py_given_x.at(x, y);
    const double hy = entropy_bits(py);

    for (const auto& [epoch, params] : checkpoints) {
        const auto dists = propagate_exact(*params, inputs, budget);
        std::vector<InfoPlanePoint> pts;
        for (const auto& d : dists) {
            InfoPlanePoint pt;
            pt.epoch = epoch;
            pt.layer = d.layer;
            pt.i_zx_bits = mutual_info(d.p, px);
            pt.i_zy_bits = layer_relevance(d.p, px, py_given_x);
            if (pt.i_zx_bits > hx + 1e-9 || pt.i_zy_bits > hy + 1e-9 ||
                pt.i_zy_bits > pt.i_zx_bits + 1e-9)
                res.dpi_violations.push_back("epoch " + std::to_string(epoch) + " layer " +
                                             std::to_string(pt.layer) +
                                             " exceeds an entropy bound");
            pts.push_back(pt);
        }
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            if (pts[i + 1].i_zx_bits > pts[i].i_zx_bits + 1e-6 ||
                pts[i + 1].i_zy_bits > pts[i].i_zy_bits + 1e-6) {
                res.dpi_violations.push_back("epoch " + std::to_string(epoch) + " layers " +
                                             std::to_string(pts[i].layer) + "->" +
                                             std::to_string(pts[i + 1].layer));
            }
        }
        res.points.insert(res.points.end(), pts.begin(), pts.end());
    }
    return res;
}

}  // namespace imb::exact
