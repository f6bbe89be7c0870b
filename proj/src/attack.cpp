#include "imb/attack.hpp"

#include <cmath>
#include <stdexcept>

#include "imb/gradient.hpp"
#include "imb/math.hpp"
#include "imb/parallel.hpp"

namespace imb {

void AttackConfig::validate() const {
    if (steps < 1) throw std::invalid_argument("attack: steps >= 1");
    if (!(max_l2_radius > 0.0)) throw std::invalid_argument("attack: max_l2_radius > 0");
    if (m_att < 1) throw std::invalid_argument("attack: m_att >= 1");
    if (mode == AttackMode::targeted && target < 0)
        throw std::invalid_argument("attack: targeted mode needs a target label");
}

namespace {

// Gradient of -log p(label | x) w.r.t. the input, through the Raiko
// surrogate. Expectation pass = det-limit single path.
Vector input_nll_gradient(const NetworkParams& params, std::span<const double> x, int label,
                          int m, bool det, RngStream& rng) {
    ObjectiveWeights w;
    const int n_layers = params.n_layers();
    w.gamma.assign(n_layers + 1, 0.0);
    w.gamma[0] = 1.0;
    w.beta.assign(n_layers, 1.0);

    const ParticleCloud cloud =
        grow_particles(params, x, det ? 1 : m, Growth::chain, rng, std::size_t{1} << 22, det);
    NetworkParams grad = NetworkParams::zeros_like(params);
    Vector dx(x.size(), 0.0);
    raiko_accumulate(cloud, label, params, w, grad, nullptr, &dx);
    return dx;
}

int predict(const NetworkParams& params, std::span<const double> x, int m, RngStream& rng,
            bool det) {
    Vector posterior(params.n_classes(), 0.0);
    const int n_draws = det ? 1 : m;
    for (int d = 0; d < n_draws; ++d) {
        Vector z(x.begin(), x.end());
        for (int l = 1; l <= params.n_layers(); ++l) {
            const BernoulliVector bv = layer_forward(params, l, z);
            z = det ? bv.probs : sample_layer(bv, rng);
        }
        const Vector q = head_forward(params, z);
        for (std::size_t j = 0; j < q.size(); ++j) posterior[j] += q[j];
    }
    int best = 0;
    for (std::size_t j = 1; j < posterior.size(); ++j)
        if (posterior[j] > posterior[best]) best = static_cast<int>(j);
    return best;
}

double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

Vector l2_attack(const NetworkParams& params, std::span<const double> x, int y_true,
                 const AttackConfig& cfg, RngStream& rng) {
    cfg.validate();
    for (double v : x)
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("l2_attack: input outside [0,1]");

    Vector cur(x.begin(), x.end());
    const int loss_label = cfg.mode == AttackMode::targeted ? cfg.target : y_true;
    // Untargeted: ascend -log p(y_true|x). Targeted: descend -log p(target|x).
    const double direction = cfg.mode == AttackMode::targeted ? -1.0 : 1.0;

    for (int step = 0; step < cfg.steps; ++step) {
        const Vector g = input_nll_gradient(params, cur, loss_label, cfg.m_att,
                                            cfg.det_gradient, rng);
        const double norm = l2_norm(g);
        if (norm == 0.0 || cfg.step_size == 0.0) continue;
        for (std::size_t i = 0; i < cur.size(); ++i)
            cur[i] += direction * cfg.step_size * g[i] / norm;

        // Project onto the L2 ball around x, then the box.
        Vector delta(cur.size());
        for (std::size_t i = 0; i < cur.size(); ++i) delta[i] = cur[i] - x[i];
        const double dn = l2_norm(delta);
        if (dn > cfg.max_l2_radius) {
            const double scale = cfg.max_l2_radius / dn;
            for (std::size_t i = 0; i < cur.size(); ++i) cur[i] = x[i] + delta[i] * scale;
        }
        for (double& v : cur) v = std::min(1.0, std::max(0.0, v));
    }
    return cur;
}

RobustnessResult robustness_eval(const NetworkParams& params, const Dataset& subset,
                                 const AttackConfig& cfg, int eval_m, std::uint64_t eval_seed,
                                 bool det_model) {
    cfg.validate();
    subset.validate();
    const int n = subset.size();

    RobustnessResult res;
    std::vector<int> clean_pred(n);
    for (int i = 0; i < n; ++i) {
        RngStream rng = RngStream::derive(eval_seed, 0, static_cast<std::uint64_t>(i));
        clean_pred[i] = predict(params, subset.inputs.row(i), eval_m, rng, det_model);
    }
    int clean_correct = 0;
    for (int i = 0; i < n; ++i)
        if (clean_pred[i] == subset.labels[i]) ++clean_correct;
    res.clean_accuracy = static_cast<double>(clean_correct) / n;

    if (cfg.mode == AttackMode::untargeted) {
        std::vector<AttackRow> rows(n);
        std::vector<int> survived((n + 7) / 8, 0), attacked((n + 7) / 8, 0);
        parallel_for_blocks(static_cast<std::size_t>(n), 8,
                            [&](std::size_t b, std::size_t lo, std::size_t hi) {
            int surv = 0, att = 0;
            for (std::size_t i = lo; i < hi; ++i) {
                AttackRow row;
                row.image_index = static_cast<int>(i);
                row.mode = AttackMode::untargeted;
                if (clean_pred[i] == subset.labels[i]) {
                    RngStream arng = RngStream::derive(eval_seed, 1, i);
                    const Vector adv =
                        l2_attack(params, subset.inputs.row(static_cast<int>(i)),
                                  subset.labels[i], cfg, arng);
                    Vector delta(adv.size());
                    for (std::size_t k = 0; k < adv.size(); ++k)
                        delta[k] = adv[k] - subset.inputs.at(static_cast<int>(i), k);
                    row.l2_norm = l2_norm(delta);
                    RngStream prng = RngStream::derive(eval_seed, 2, i);
                    const int post = predict(params, adv, eval_m, prng, det_model);
                    row.success = post != subset.labels[i];
                    ++att;
                    if (!row.success) ++surv;
                }
                rows[i] = row;
            }
            survived[b] = surv;
            attacked[b] = att;
        });
        int surv = 0, att = 0;
        for (std::size_t b = 0; b < survived.size(); ++b) {
            surv += survived[b];
            att += attacked[b];
        }
        res.n_attacked = att;
        res.robustness_pct = att > 0 ? 100.0 * surv / att : 0.0;
        for (int i = 0; i < n; ++i)
            if (clean_pred[i] == subset.labels[i]) res.rows.push_back(rows[i]);
        return res;
    }

    // Targeted: every other label for every image.
    struct Pair {
        int image;
        int target;
    };
    std::vector<Pair> pairs;
    for (int i = 0; i < n; ++i)
        for (int t = 0; t < subset.n_classes; ++t)
            if (t != subset.labels[i]) pairs.push_back({i, t});

    std::vector<AttackRow> rows(pairs.size());
    std::vector<int> failed((pairs.size() + 7) / 8, 0);
    parallel_for_blocks(pairs.size(), 8, [&](std::size_t b, std::size_t lo, std::size_t hi) {
        int fail = 0;
        for (std::size_t k = lo; k < hi; ++k) {
            const auto [i, t] = pairs[k];
            AttackConfig local = cfg;
            local.target = t;
            AttackRow row;
            row.image_index = i;
            row.mode = AttackMode::targeted;
            row.target = t;
            RngStream arng = RngStream::derive(eval_seed, 3 + static_cast<std::uint64_t>(t), i);
            const Vector adv = l2_attack(params, subset.inputs.row(i), subset.labels[i], local,
                                         arng);
            Vector delta(adv.size());
            for (std::size_t j = 0; j < adv.size(); ++j)
                delta[j] = adv[j] - subset.inputs.at(i, j);
            row.l2_norm = l2_norm(delta);
            RngStream prng = RngStream::derive(eval_seed, 100 + static_cast<std::uint64_t>(t), i);
            const int post = predict(params, adv, eval_m, prng, det_model);
            row.success = post == t;
            if (!row.success) ++fail;
            rows[k] = row;
        }
        failed[b] = fail;
    });
    int fail = 0;
    for (int f : failed) fail += f;
    res.n_attacked = static_cast<int>(pairs.size());
    res.robustness_pct = pairs.empty() ? 0.0 : 100.0 * fail / pairs.size();
    res.rows = std::move(rows);
    return res;
}

}  // namespace imb
