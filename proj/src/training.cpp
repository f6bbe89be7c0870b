#include "imb/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "imb/math.hpp"
#include "imb/parallel.hpp"

namespace imb {

Algorithm algorithm_from_string(const std::string& s) {
    if (s == "joint") return Algorithm::joint;
    if (s == "greedy") return Algorithm::greedy;
    if (s == "mle") return Algorithm::mle;
    throw std::invalid_argument("unknown algorithm: " + s);
}

std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::joint: return "joint";
        case Algorithm::greedy: return "greedy";
        case Algorithm::mle: return "mle";
    }
    return "?";
}

void IMBConfig::validate(int n_layers) const {
    if (static_cast<int>(beta.size()) != n_layers)
        throw std::invalid_argument("config: beta needs one entry per hidden layer");
    if (algorithm != Algorithm::mle && static_cast<int>(gamma.size()) != n_layers + 1)
        throw std::invalid_argument("config: gamma needs one entry per layer 0..L");
    for (double b : beta)
        if (!(b > 0.0)) throw std::invalid_argument("config: beta must be positive");
    for (double g : gamma)
        if (!(g >= 0.0)) throw std::invalid_argument("config: gamma must be nonnegative");
    if (m_samples < 1) throw std::invalid_argument("config: m_samples >= 1");
    if (epochs < 0) throw std::invalid_argument("config: epochs >= 0");
    if (batch_size < 1) throw std::invalid_argument("config: batch_size >= 1");
}

ObjectiveWeights IMBConfig::weights(int n_layers) const {
    ObjectiveWeights w;
    w.beta = beta;
    if (algorithm == Algorithm::mle) {
        w.gamma.assign(n_layers + 1, 0.0);
        w.gamma[0] = 1.0;
    } else {
        w.gamma = gamma;
    }
    return w;
}

namespace {

constexpr int kChunk = 32;          // inputs per gradient chunk, fixed for determinism
constexpr double kRhoClip = 30.0;   // keeps marginals inside the open interval (0,1)

struct BatchResult {
    NetworkParams grad;
    ObjectiveBreakdown breakdown;  // per-input sums, not yet averaged
    int count = 0;
};

// Gradient and objective sums over batch indices, computed in fixed chunks
// that may run on any thread; chunk results merge in chunk order so the
// outcome is independent of the thread count.
BatchResult batch_gradient(const NetworkParams& params, const Dataset& data,
                           std::span<const std::int32_t> batch, const ObjectiveWeights& weights,
                           const IMBConfig& cfg, int epoch) {
    const std::size_t n = batch.size();
    const std::size_t n_chunks = (n + kChunk - 1) / kChunk;
    std::vector<BatchResult> chunks(n_chunks);

    parallel_for_blocks(n, kChunk, [&](std::size_t ci, std::size_t lo, std::size_t hi) {
        BatchResult res;
        res.grad = NetworkParams::zeros_like(params);
        for (std::size_t k = lo; k < hi; ++k) {
            const std::int32_t idx = batch[k];
            RngStream rng = RngStream::derive(cfg.seed, static_cast<std::uint64_t>(epoch),
                                              static_cast<std::uint64_t>(idx));
            const ParticleCloud cloud =
                grow_particles(params, data.inputs.row(idx), cfg.m_samples, cfg.growth, rng,
                               cfg.particle_budget, cfg.det_limit);
            raiko_accumulate(cloud, data.labels[idx], params, weights, res.grad, &res.breakdown);
            ++res.count;
        }
        chunks[ci] = std::move(res);
    });

    BatchResult total = std::move(chunks[0]);
    Vector flat(total.grad.flat_size()), tmp(flat.size());
    total.grad.to_flat(flat);
    for (std::size_t c = 1; c < n_chunks; ++c) {
        chunks[c].grad.to_flat(tmp);
        for (std::size_t i = 0; i < flat.size(); ++i) flat[i] += tmp[i];
        for (std::size_t l = 0; l < total.breakdown.vcr.size(); ++l) {
            total.breakdown.vcr[l] += chunks[c].breakdown.vcr[l];
            total.breakdown.comp[l] += chunks[c].breakdown.comp[l];
        }
        total.breakdown.floor_clamps += chunks[c].breakdown.floor_clamps;
        total.count += chunks[c].count;
    }
    total.grad.from_flat(flat);
    return total;
}

ObjectiveBreakdown finalize_breakdown(ObjectiveBreakdown bd, int count) {
    const double inv = 1.0 / static_cast<double>(count);
    bd.total = 0.0;
    for (std::size_t l = 0; l < bd.vcr.size(); ++l) {
        bd.vcr[l] *= inv;
        bd.comp[l] *= inv;
        bd.total += bd.layer_term(static_cast<int>(l));
    }
    return bd;
}

// Objective over a whole dataset without updating anything (epoch-0 record).
ObjectiveBreakdown dataset_objective(const NetworkParams& params, const Dataset& data,
                                     const ObjectiveWeights& weights, const IMBConfig& cfg,
                                     int epoch) {
    std::vector<std::int32_t> all(data.size());
    std::iota(all.begin(), all.end(), 0);
    BatchResult res = batch_gradient(params, data, all, weights, cfg, epoch);
    return finalize_breakdown(std::move(res.breakdown), res.count);
}

struct Trainer {
    const TrainData& data;
    const std::vector<int>& widths;
    const IMBConfig& cfg;
    NetworkParams params;
    OptState opt_state;
    TrainLog log;
    std::vector<std::uint8_t> freeze;  // empty = all trainable
    bool mi_enabled = false;
    bool mi_failed = false;

    Trainer(const TrainData& d, const std::vector<int>& w, const IMBConfig& c)
        : data(d), widths(w), cfg(c) {
        if (!data.train) throw std::invalid_argument("train dataset required");
        data.train->validate();
        cfg.validate(static_cast<int>(widths.size()));
        RngStream rng = RngStream::derive(cfg.seed, 0, 0xA110);
        params = init_network(data.train->inputs.cols, widths, data.train->n_classes, rng);
        opt_state.reset(params.flat_size());
        mi_enabled = cfg.mi_eval_every > 0 && data.mi_joint && data.mi_joint->has_joint();
        if (cfg.batch_size > data.train->size())
            log.warnings.push_back("batch_size " + std::to_string(cfg.batch_size) +
                                   " exceeds train size " + std::to_string(data.train->size()) +
                                   ", using a single full batch");
    }

    void clamp_marginal_logits() {
        for (auto& lp : params.layers) {
            for (double& rho : lp.r_logits) rho = std::clamp(rho, -kRhoClip, kRhoClip);
        }
    }

    int last_mi_epoch = -1;

    void log_info_plane(int epoch) {
        if (!mi_enabled || mi_failed || epoch == last_mi_epoch) return;
        last_mi_epoch = epoch;
        try {
            const std::pair<int, const NetworkParams*> cp{epoch, &params};
            const auto res = exact::info_plane_trace({&cp, 1}, data.mi_joint->inputs,
                                                     data.mi_joint->px, data.mi_joint->py_given_x);
            log.info_points.insert(log.info_points.end(), res.points.begin(), res.points.end());
            for (const auto& v : res.dpi_violations) log.warnings.push_back("dpi: " + v);
        } catch (const std::runtime_error& e) {
            log.warnings.push_back(std::string("info-plane logging disabled: ") + e.what());
            mi_failed = true;
        }
    }

    void eval_errors(EpochRecord& rec, int repeats) {
        rec.train_error = evaluate(params, *data.train, cfg.m_samples, repeats,
                                   cfg.seed ^ 0xE7A1u, cfg.det_limit)
                              .mean_error;
        if (data.test && data.test->size() > 0)
            rec.test_error = evaluate(params, *data.test, cfg.m_samples, repeats,
                                      cfg.seed ^ 0x7E57u, cfg.det_limit)
                                 .mean_error;
    }

    void maybe_eval_errors(EpochRecord& rec) {
        if (cfg.error_eval_every > 0 && rec.epoch % cfg.error_eval_every == 0)
            eval_errors(rec, 1);
    }

    // One optimization phase over [first_epoch, last_epoch] with the given
    // objective weights; used once for joint/mle and per stage for greedy.
    void run_phase(int first_epoch, int last_epoch, const ObjectiveWeights& weights, int stage) {
        const int n = data.train->size();
        Vector flat(params.flat_size()), grad_flat(flat.size());
        std::vector<double> recent_totals;

        for (int epoch = first_epoch; epoch <= last_epoch; ++epoch) {
            const auto batches = epoch_batches(n, cfg.batch_size, cfg.seed, epoch);
            ObjectiveBreakdown epoch_bd;
            int epoch_count = 0;
            for (const auto& batch : batches) {
                BatchResult res = batch_gradient(params, *data.train, batch, weights, cfg, epoch);
                const double inv = 1.0 / static_cast<double>(res.count);
                res.grad.to_flat(grad_flat);
                for (double& g : grad_flat) g *= inv;
                params.to_flat(flat);
                optimizer_step(flat, grad_flat, opt_state, cfg.optimizer, freeze);
                params.from_flat(flat);
                clamp_marginal_logits();

                if (epoch_bd.vcr.empty()) {
                    epoch_bd = std::move(res.breakdown);
                } else {
                    for (std::size_t l = 0; l < epoch_bd.vcr.size(); ++l) {
                        epoch_bd.vcr[l] += res.breakdown.vcr[l];
                        epoch_bd.comp[l] += res.breakdown.comp[l];
                    }
                    epoch_bd.floor_clamps += res.breakdown.floor_clamps;
                }
                epoch_count += res.count;
            }

            EpochRecord rec;
            rec.epoch = epoch;
            rec.stage = stage;
            rec.obj = finalize_breakdown(std::move(epoch_bd), epoch_count);
            maybe_eval_errors(rec);
            log.epochs.push_back(std::move(rec));

            if (mi_enabled && epoch % std::max(1, cfg.mi_eval_every) == 0) log_info_plane(epoch);
            if (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 && epoch != cfg.epochs)
                log.checkpoints.emplace_back(epoch, params);

            if (cfg.early_stop_tol > 0.0) {
                recent_totals.push_back(log.epochs.back().obj.total);
                const std::size_t w = 100;
                if (recent_totals.size() >= 2 * w) {
                    const auto avg = [&](std::size_t from) {
                        double s = 0.0;
                        for (std::size_t i = from; i < from + w; ++i) s += recent_totals[i];
                        return s / w;
                    };
                    const double prev = avg(recent_totals.size() - 2 * w);
                    const double cur = avg(recent_totals.size() - w);
                    if (prev - cur < cfg.early_stop_tol) break;
                }
            }
        }
    }

    TrainLog finish() {
        EpochRecord& last = log.epochs.back();
        eval_errors(last, cfg.eval_repeats);
        log_info_plane(last.epoch);
        log.checkpoints.emplace_back(last.epoch, params);
        log.final_params = params;
        return std::move(log);
    }
};

TrainLog run_single_phase(const TrainData& data, const std::vector<int>& widths,
                          const IMBConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    Trainer tr(data, widths, cfg);
    const ObjectiveWeights weights = cfg.weights(static_cast<int>(widths.size()));

    EpochRecord init;
    init.epoch = 0;
    init.obj = dataset_objective(tr.params, *data.train, weights, cfg, 0);
    tr.maybe_eval_errors(init);
    tr.log.epochs.push_back(std::move(init));
    tr.log_info_plane(0);

    tr.run_phase(1, cfg.epochs, weights, 0);
    TrainLog out = tr.finish();
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

}  // namespace

TrainLog train_joint_imb(const TrainData& data, const std::vector<int>& widths,
                         const IMBConfig& cfg) {
    if (cfg.algorithm != Algorithm::joint)
        throw std::invalid_argument("train_joint_imb: config algorithm must be joint");
    return run_single_phase(data, widths, cfg);
}

TrainLog train_mle(const TrainData& data, const std::vector<int>& widths, const IMBConfig& cfg) {
    if (cfg.algorithm != Algorithm::mle)
        throw std::invalid_argument("train_mle: config algorithm must be mle");
    return run_single_phase(data, widths, cfg);
}

TrainLog train_greedy_imb(const TrainData& data, const std::vector<int>& widths,
                          const IMBConfig& cfg) {
    if (cfg.algorithm != Algorithm::greedy)
        throw std::invalid_argument("train_greedy_imb: config algorithm must be greedy");
    const auto t0 = std::chrono::steady_clock::now();
    const int n_layers = static_cast<int>(widths.size());
    Trainer tr(data, widths, cfg);

    // Stage s optimizes the layer-s objective; encoders into layers 1..s-1
    // (weights, biases and marginal logits) stay frozen.
    ObjectiveWeights stage1 = cfg.weights(n_layers);
    stage1.gamma.assign(n_layers + 1, 0.0);
    stage1.gamma[1] = 1.0;

    EpochRecord init;
    init.epoch = 0;
    init.obj = dataset_objective(tr.params, *data.train, stage1, cfg, 0);
    tr.maybe_eval_errors(init);
    tr.log.epochs.push_back(std::move(init));
    tr.log_info_plane(0);

    const int base = cfg.stage_epochs > 0 ? cfg.stage_epochs : cfg.epochs / n_layers;
    int epoch = 1;
    for (int stage = 1; stage <= n_layers; ++stage) {
        const int budget = stage == n_layers && cfg.stage_epochs == 0
                               ? cfg.epochs - base * (n_layers - 1)
                               : base;
        if (budget <= 0) continue;
        ObjectiveWeights w = cfg.weights(n_layers);
        w.gamma.assign(n_layers + 1, 0.0);
        w.gamma[stage] = 1.0;

        tr.freeze.assign(tr.params.flat_size(), 0);
        std::size_t at = 0;
        for (int l = 1; l <= n_layers; ++l) {
            const LayerParams& lp = tr.params.layers[l - 1];
            const std::size_t block = lp.W.size() + lp.b.size() + lp.r_logits.size();
            if (l < stage) std::fill_n(tr.freeze.begin() + at, block, std::uint8_t{1});
            at += block;
        }
        tr.opt_state.reset(tr.params.flat_size());
        tr.log.stage_starts.push_back(epoch);
        tr.run_phase(epoch, epoch + budget - 1, w, stage);
        epoch = tr.log.epochs.back().epoch + 1;
    }
    TrainLog out = tr.finish();
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

TrainLog train(const TrainData& data, const std::vector<int>& widths, const IMBConfig& cfg) {
    switch (cfg.algorithm) {
        case Algorithm::joint: return train_joint_imb(data, widths, cfg);
        case Algorithm::greedy: return train_greedy_imb(data, widths, cfg);
        case Algorithm::mle: return train_mle(data, widths, cfg);
    }
    throw std::invalid_argument("train: bad algorithm");
}

EvalResult evaluate(const NetworkParams& params, const Dataset& data, int m, int repeats,
                    std::uint64_t seed, bool det_limit) {
    if (repeats < 1) throw std::invalid_argument("evaluate: repeats >= 1");
    if (m < 1) throw std::invalid_argument("evaluate: m >= 1");
    data.validate();
    const int n = data.size();
    const int n_layers = params.n_layers();

    EvalResult res;
    for (int rep = 0; rep < repeats; ++rep) {
        std::vector<int> wrong_per_block((n + 255) / 256, 0);
        parallel_for_blocks(static_cast<std::size_t>(n), 256,
                            [&](std::size_t b, std::size_t lo, std::size_t hi) {
            int wrong = 0;
            Vector posterior(params.n_classes());
            for (std::size_t i = lo; i < hi; ++i) {
                RngStream rng = RngStream::derive(seed, static_cast<std::uint64_t>(rep) + 1,
                                                  static_cast<std::uint64_t>(i));
                std::fill(posterior.begin(), posterior.end(), 0.0);
                const int n_draws = det_limit ? 1 : m;
                for (int d = 0; d < n_draws; ++d) {
                    Vector z(data.inputs.row(static_cast<int>(i)).begin(),
                             data.inputs.row(static_cast<int>(i)).end());
                    for (int l = 1; l <= n_layers; ++l) {
                        const BernoulliVector bv = layer_forward(params, l, z);
                        z = det_limit ? bv.probs : sample_layer(bv, rng);
                    }
                    const Vector q = head_forward(params, z);
                    for (std::size_t j = 0; j < q.size(); ++j) posterior[j] += q[j];
                }
                int best = 0;
                for (std::size_t j = 1; j < posterior.size(); ++j)
                    if (posterior[j] > posterior[best]) best = static_cast<int>(j);
                if (best != data.labels[i]) ++wrong;
            }
            wrong_per_block[b] = wrong;
        });
        int wrong = 0;
        for (int w : wrong_per_block) wrong += w;
        res.per_repeat.push_back(static_cast<double>(wrong) / n);
    }
    double mean = 0.0;
    for (double e : res.per_repeat) mean += e;
    mean /= repeats;
    double var = 0.0;
    for (double e : res.per_repeat) var += (e - mean) * (e - mean);
    res.mean_error = mean;
    res.std_error = std::sqrt(var / repeats);
    return res;
}

}  // namespace imb
