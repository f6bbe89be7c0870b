// Acceptance suite: one pass/fail line per criterion.
//
// Usage: imb_acceptance <criterion 1..8>
// Exit codes: 0 pass, 1 fail, 77 skipped (required dataset not present).
//
// Criteria 5 and 7 need the MNIST IDX files; point IMB_MNIST_DIR at a
// directory containing train-images-idx3-ubyte etc., or place them under
// data/mnist. Without them those criteria report SKIP.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "imb/attack.hpp"
#include "imb/exact.hpp"
#include "imb/gradient.hpp"
#include "imb/report.hpp"
#include "imb/training.hpp"

using namespace imb;
namespace fs = std::filesystem;

namespace {

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

int report(int criterion, bool pass, const std::string& detail, double seconds) {
    std::printf("[%s] criterion %d: %s (%.1f s)\n", pass ? "PASS" : "FAIL", criterion,
                detail.c_str(), seconds);
    return pass ? 0 : 1;
}

int skip(int criterion, const std::string& why) {
    std::printf("[SKIP] criterion %d: %s\n", criterion, why.c_str());
    return 77;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// ---- criterion 1: Lemma 1 identity suite -----------------------------------

int criterion_1() {
    Timer timer;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        RngStream rng(seed * 31 + 7);
        exact::DiscreteJoint dj;
        const int nx = 8, ny = 4, n1 = 4, n2 = 4;
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
        const auto res = exact::lemma1_residuals(dj);
        worst = std::max({worst, res.delta_x, res.delta_y});
    }
    const double secs = timer.seconds();
    return report(1, worst < 1e-10 && secs < 5.0,
                  "lemma-1 residuals on 50 random chains, max " + fmt(worst) + " nats", secs);
}

// ---- criterion 2: variational bound suite ----------------------------------

int criterion_2() {
    Timer timer;
    bool ok = true;
    std::string detail;
    double worst_margin = 1e9;

    Matrix inputs(16, 4);
    for (int s = 0; s < 16; ++s)
        for (int i = 0; i < 4; ++i) inputs.at(s, i) = (s >> i) & 1;

    for (std::uint64_t seed = 1; seed <= 5 && ok; ++seed) {
        RngStream rng(seed);
        NetworkParams p = init_network(4, {4, 3}, 2, rng);
        for (auto& lp : p.layers) {
            for (double& b : lp.b) b = rng.uniform(-0.5, 0.5);
            for (double& r : lp.r_logits) r = rng.uniform(-1.0, 1.0);
        }
        Vector px(16);
        double sum = 0.0;
        for (double& v : px) sum += (v = rng.uniform(0.2, 1.0));
        for (double& v : px) v /= sum;
        Matrix py_x(16, 2);
        for (int x = 0; x < 16; ++x) {
            const double q = rng.uniform(0.1, 0.9);
            py_x.at(x, 0) = q;
            py_x.at(x, 1) = 1.0 - q;
        }

        for (int l = 1; l <= 2; ++l) {
            const double hy = exact::exact_cond_entropy_nats(p, inputs, px, py_x, l);
            const double vcr = exact::exact_vcr_nats(p, inputs, px, py_x, l);
            const double mi = exact::exact_mi_zl_zprev_nats(p, inputs, px, l);
            const double comp = exact::exact_compression_nats(p, inputs, px, l);
            worst_margin = std::min({worst_margin, vcr - hy, comp - mi});
            if (vcr - hy < -1e-10 || comp - mi < -1e-10) ok = false;
        }
        const double nll = exact::exact_nll_nats(p, inputs, px, py_x);
        const double vcr_top = exact::exact_vcr_nats(p, inputs, px, py_x, 2);
        worst_margin = std::min(worst_margin, vcr_top - nll);
        if (vcr_top - nll < -1e-10) ok = false;

        // Monte-Carlo side of the layer-0 identity: identical reduction bitwise.
        for (int x = 0; x < 4; ++x) {
            RngStream grow = RngStream::derive(seed, 9, x);
            const ParticleCloud cloud = grow_particles(p, inputs.row(x), 6, Growth::chain, grow);
            if (nll_term(cloud, p, x % 2).nats != vcr_term(cloud, p, 0, x % 2).nats) {
                ok = false;
                detail = "nll_term != vcr_term(l=0) bitwise";
            }
        }
    }
    const double secs = timer.seconds();
    if (detail.empty())
        detail = "bounds hold on random 4-4-3-2 nets, worst margin " + fmt(worst_margin) + " nats";
    return report(2, ok && secs < 10.0, detail, secs);
}

// ---- criterion 3: gradient suite --------------------------------------------

int criterion_3() {
    Timer timer;
    double worst_full = 0.0, worst_kl = 0.0;

    auto fd_grad = [](std::span<const ParticleCloud> clouds, std::span<const int> labels,
                      const NetworkParams& params, const ObjectiveWeights& w, double h) {
        NetworkParams p = params;
        Vector flat(p.flat_size());
        p.to_flat(flat);
        Vector g(flat.size());
        for (std::size_t i = 0; i < flat.size(); ++i) {
            const double keep = flat[i];
            flat[i] = keep + h;
            p.from_flat(flat);
            const double up = surrogate_objective(clouds, labels, p, w);
            flat[i] = keep - h;
            p.from_flat(flat);
            const double dn = surrogate_objective(clouds, labels, p, w);
            flat[i] = keep;
            g[i] = (up - dn) / (2.0 * h);
        }
        return g;
    };

    for (int point = 0; point < 20; ++point) {
        const std::uint64_t seed = 100 + point;
        RngStream rng(seed);
        NetworkParams params = init_network(3, {4, 3}, 2, rng);
        for (auto& lp : params.layers)
            for (double& r : lp.r_logits) r = rng.uniform(-1.0, 1.0);
        std::vector<ParticleCloud> clouds;
        std::vector<int> labels;
        const Growth growth = point % 2 ? Growth::tree : Growth::chain;
        for (int i = 0; i < 3; ++i) {
            Vector x(3);
            for (double& v : x) v = rng.uniform01();
            RngStream grow = RngStream::derive(seed, 1, i);
            clouds.push_back(grow_particles(params, x, point % 2 ? 2 : 4, growth, grow));
            labels.push_back(static_cast<int>(rng.next_u64() % 2));
        }
        ObjectiveWeights w;
        w.gamma = {1.0, 1.0, 1.0};
        w.beta = {0.31, 0.17};

        const GradientResult res = raiko_backward(clouds, labels, params, w);
        Vector an(res.grad.flat_size());
        res.grad.to_flat(an);
        const Vector fd = fd_grad(clouds, labels, params, w, 1e-5);
        double scale = 0.0;
        for (double v : an) scale = std::max(scale, std::abs(v));
        for (std::size_t i = 0; i < an.size(); ++i)
            worst_full = std::max(worst_full, std::abs(an[i] - fd[i]) / std::max(scale, 1e-12));

        // KL closed form: isolate marginal-logit coordinates.
        NetworkParams mask = NetworkParams::zeros_like(params);
        for (auto& lp : mask.layers) std::fill(lp.r_logits.begin(), lp.r_logits.end(), 1.0);
        Vector sel(mask.flat_size());
        mask.to_flat(sel);
        double kl_scale = 0.0;
        for (std::size_t i = 0; i < an.size(); ++i)
            if (sel[i] != 0.0) kl_scale = std::max(kl_scale, std::abs(an[i]));
        for (std::size_t i = 0; i < an.size(); ++i)
            if (sel[i] != 0.0)
                worst_kl = std::max(worst_kl, std::abs(an[i] - fd[i]) / std::max(kl_scale, 1e-12));
    }
    const double secs = timer.seconds();
    const bool ok = worst_full < 1e-4 && worst_kl < 1e-6 && secs < 30.0;
    return report(3, ok,
                  "raiko vs finite differences at 20 points: full " + fmt(worst_full) +
                      ", kl terms " + fmt(worst_kl),
                  secs);
}

// ---- criterion 4: toy dynamics ----------------------------------------------

struct ToyRun {
    TrainLog log;
    double max_l1_iy = 0.0;
    std::vector<exact::InfoPlanePoint> final_points;
};

ToyRun toy_run(Algorithm alg, std::uint64_t seed, int epochs) {
    static const Dataset task = gen_binary_task(1, 12);
    const SplitResult split = split_dataset(task, 0.2, 1);
    TrainData data;
    data.train = &split.train;
    data.mi_joint = &task;

    // Alg-1 tree growth restores genuine per-layer inner averages; batch 64
    // gives enough SGD updates to clear the deep-net plateau at every seed.
    IMBConfig cfg;
    cfg.algorithm = alg;
    cfg.beta.assign(4, 1e-4);
    cfg.gamma.assign(5, 1.0);
    cfg.m_samples = 2;
    cfg.growth = Growth::tree;
    cfg.optimizer.kind = OptimizerKind::sgd;
    cfg.optimizer.lr = 1.0;
    cfg.epochs = epochs;
    cfg.batch_size = 64;
    cfg.seed = seed;
    cfg.mi_eval_every = 50;
    cfg.eval_repeats = 1;

    ToyRun run;
    run.log = train(data, {10, 8, 6, 4}, cfg);
    int last = 0;
    for (const auto& p : run.log.info_points) last = std::max(last, p.epoch);
    for (const auto& p : run.log.info_points) {
        if (p.layer == 1) run.max_l1_iy = std::max(run.max_l1_iy, p.i_zy_bits);
        if (p.epoch == last) run.final_points.push_back(p);
    }
    return run;
}

int criterion_4() {
    Timer timer;
    const int epochs = 5000;
    bool ok = true;
    std::string detail;

    for (std::uint64_t seed : {1ull, 2ull}) {
        const ToyRun joint = toy_run(Algorithm::joint, seed, epochs);
        const ToyRun mle = toy_run(Algorithm::mle, seed, epochs);

        // (a) data-processing inequality at every logged epoch
        std::size_t dpi = joint.log.warnings.size() + mle.log.warnings.size();
        for (const auto& w : joint.log.warnings)
            if (w.rfind("dpi", 0) != 0) --dpi;
        for (const auto& w : mle.log.warnings)
            if (w.rfind("dpi", 0) != 0) --dpi;
        if (dpi > 0) {
            ok = false;
            detail += "seed " + std::to_string(seed) + ": " + std::to_string(dpi) +
                      " DPI violations; ";
        }

        // (b) JointIMB layer-1 relevance exceeds 0.8 bits at some epoch
        if (joint.max_l1_iy <= 0.8) {
            ok = false;
            detail += "seed " + std::to_string(seed) + ": joint layer-1 max " +
                      fmt(joint.max_l1_iy) + " <= 0.8; ";
        }

        // (c) MLE relevance at every layer at its final epoch <= joint layer-1 max
        double mle_final_best = 0.0;
        for (const auto& p : mle.final_points) {
            mle_final_best = std::max(mle_final_best, p.i_zy_bits);
            if (p.i_zy_bits > joint.max_l1_iy) {
                ok = false;
                detail += "seed " + std::to_string(seed) + ": mle layer " +
                          std::to_string(p.layer) + " final " + fmt(p.i_zy_bits) +
                          " > joint max " + fmt(joint.max_l1_iy) + "; ";
            }
        }

        // (d) joint reaches the MLE final best relevance within 25% of the epochs
        int crossing = -1;
        for (const auto& p : joint.log.info_points) {
            if (p.layer == 1 && p.i_zy_bits >= mle_final_best) {
                crossing = p.epoch;
                break;
            }
        }
        if (crossing < 0 || crossing > epochs / 4) {
            ok = false;
            detail += "seed " + std::to_string(seed) + ": joint crossed mle-final " +
                      fmt(mle_final_best) + " at epoch " + std::to_string(crossing) + " > " +
                      std::to_string(epochs / 4) + "; ";
        } else {
            detail += "seed " + std::to_string(seed) + ": joint max " + fmt(joint.max_l1_iy) +
                      ", mle final best " + fmt(mle_final_best) + ", crossed at epoch " +
                      std::to_string(crossing) + "; ";
        }

        // training-objective trend (100-epoch moving average vs epoch 1)
        const auto& recs = joint.log.epochs;
        double ma = 0.0;
        for (std::size_t e = recs.size() - 100; e < recs.size(); ++e) ma += recs[e].obj.total;
        ma /= 100.0;
        if (ma > recs[1].obj.total) {
            ok = false;
            detail += "seed " + std::to_string(seed) + ": joint 100-epoch MA did not improve; ";
        }
    }
    const double secs = timer.seconds();
    return report(4, ok && secs < 7200.0, detail, secs);
}

// ---- criteria 5 and 7: MNIST desk scale --------------------------------------

std::string mnist_dir() {
    if (const char* env = std::getenv("IMB_MNIST_DIR")) return env;
    return "data/mnist";
}

bool mnist_available(std::string& dir) {
    dir = mnist_dir();
    return fs::exists(dir + "/train-images-idx3-ubyte") &&
           fs::exists(dir + "/train-labels-idx1-ubyte") &&
           fs::exists(dir + "/t10k-images-idx3-ubyte") &&
           fs::exists(dir + "/t10k-labels-idx1-ubyte");
}

IMBConfig mnist_small_config(Algorithm alg, std::uint64_t seed) {
    IMBConfig cfg;
    cfg.algorithm = alg;
    cfg.beta.assign(2, 1e-4);
    cfg.gamma.assign(3, 1.0);
    cfg.m_samples = 8;
    cfg.growth = Growth::chain;
    cfg.optimizer.kind = OptimizerKind::adam;
    cfg.optimizer.lr = 1e-3;
    cfg.epochs = 20;
    cfg.batch_size = 128;
    cfg.seed = seed;
    cfg.eval_repeats = 3;
    return cfg;
}

int criterion_5() {
    std::string dir;
    if (!mnist_available(dir))
        return skip(5, "MNIST IDX files not found under " + dir + " (set IMB_MNIST_DIR)");
    Timer timer;

    const Dataset train_full =
        load_mnist_idx(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte");
    const Dataset train10k = head_subset(train_full, 10000);
    const Dataset test =
        load_mnist_idx(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte");
    TrainData data;
    data.train = &train10k;
    data.test = &test;

    double joint_sum = 0.0, mle_sum = 0.0;
    std::string detail;
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        const TrainLog joint = train(data, {128, 128}, mnist_small_config(Algorithm::joint, seed));
        const TrainLog mle = train(data, {128, 128}, mnist_small_config(Algorithm::mle, seed));
        joint_sum += joint.epochs.back().test_error;
        mle_sum += mle.epochs.back().test_error;
        detail += "seed " + std::to_string(seed) + ": joint " +
                  fmt(100.0 * joint.epochs.back().test_error) + "% mle " +
                  fmt(100.0 * mle.epochs.back().test_error) + "%; ";
    }
    const double joint_err = joint_sum / 3.0, mle_err = mle_sum / 3.0;
    const double secs = timer.seconds();
    const bool ok = joint_err <= 0.08 && joint_err <= mle_err + 0.01 && secs < 1800.0;
    return report(5, ok,
                  detail + "mean joint " + fmt(100.0 * joint_err) + "% vs mle " +
                      fmt(100.0 * mle_err) + "%",
                  secs);
}

int criterion_7() {
    std::string dir;
    if (!mnist_available(dir))
        return skip(7, "MNIST IDX files not found under " + dir + " (set IMB_MNIST_DIR)");
    Timer timer;

    const Dataset train_full =
        load_mnist_idx(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte");
    const Dataset train10k = head_subset(train_full, 10000);
    const Dataset test =
        load_mnist_idx(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte");
    const Dataset subset = head_subset(test, 200);
    TrainData data;
    data.train = &train10k;

    IMBConfig det_cfg = mnist_small_config(Algorithm::mle, 1);
    det_cfg.det_limit = true;
    det_cfg.m_samples = 1;
    const TrainLog det = train(data, {128, 128}, det_cfg);
    const TrainLog joint = train(data, {128, 128}, mnist_small_config(Algorithm::joint, 1));

    AttackConfig acfg;
    acfg.steps = 100;
    acfg.step_size = 0.25;
    acfg.max_l2_radius = 3.0;
    const RobustnessResult r_det =
        robustness_eval(det.final_params, subset, acfg, 8, 17, /*det_model=*/true);
    const RobustnessResult r_joint =
        robustness_eval(joint.final_params, subset, acfg, 8, 17, /*det_model=*/false);

    const double secs = timer.seconds();
    const bool ok =
        r_det.robustness_pct < 10.0 && r_det.robustness_pct < r_joint.robustness_pct &&
        secs < 1200.0;
    return report(7, ok,
                  "robustness DET " + fmt(r_det.robustness_pct) + "% < JointIMB " +
                      fmt(r_joint.robustness_pct) + "% at radius 3.0",
                  secs);
}

// ---- criterion 6: conflict probe ---------------------------------------------

int criterion_6() {
    // At beta = 1 both Lagrangians reduce to I(Z_l;X|Y) >= 0, which every
    // constant encoder minimizes for both layers at once, so no conflict can
    // exist there; beta = 2 sits between the trivial and the deterministic
    // phases, where the two argmin sets genuinely separate.
    Timer timer;
    const Matrix pxy = exact::builtin_probe_joint();
    exact::ProbeConfig cfg;
    cfg.beta1 = 2.0;
    cfg.beta2 = 2.0;
    cfg.grid = 21;

    cfg.mode = exact::Channel2Mode::full_grid;
    const auto generic = exact::conflict_probe(pxy, cfg);
    cfg.mode = exact::Channel2Mode::fixed_copy;
    const auto suff = exact::conflict_probe(pxy, cfg);
    cfg.mode = exact::Channel2Mode::constant_family;
    const auto indep = exact::conflict_probe(pxy, cfg);

    const double secs = timer.seconds();
    const bool ok = generic.conflicting && !generic.inconclusive && !suff.conflicting &&
                    !indep.conflicting && secs < 300.0;
    return report(6, ok,
                  "generic: " + generic.verdict + " (argmin1 " +
                      std::to_string(generic.argmin1_count) + ", argmin2 " +
                      std::to_string(generic.argmin2_count) + "); sufficient: " + suff.verdict +
                      "; independence: " + indep.verdict,
                  secs);
}

// ---- criterion 8: bitwise reproducibility --------------------------------------

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

int criterion_8() {
    Timer timer;
    const char* bin_env = std::getenv("IMB_LAB_BIN");
    const std::string bin = bin_env ? bin_env : "./tools/imb-lab";
    if (!fs::exists(bin))
        return report(8, false, "imb-lab binary not found at " + bin + " (set IMB_LAB_BIN)",
                      timer.seconds());

    const fs::path base = fs::temp_directory_path() / "imb_accept8";
    fs::remove_all(base);
    fs::create_directories(base);
    bool ok = true;
    std::string detail;
    for (int run = 0; run < 2; ++run) {
        const std::string out = (base / ("run" + std::to_string(run))).string();
        const std::string cmd = bin +
                                " train --preset toy-12bit --epochs 40 --seed 9 --out " + out +
                                " > " + out + ".log 2>&1";
        if (std::system(cmd.c_str()) != 0) {
            ok = false;
            detail = "training run failed, see " + out + ".log";
        }
    }
    if (ok) {
        for (const char* name : {"trainlog.csv", "info_plane.csv"}) {
            const std::string a = slurp((base / "run0" / name).string());
            const std::string b = slurp((base / "run1" / name).string());
            if (a.empty() || a != b) {
                ok = false;
                detail += std::string(name) + " differs between identical runs; ";
            }
        }
        if (ok) detail = "toy preset re-run: trainlog.csv and info_plane.csv byte-identical";
    }
    const double secs = timer.seconds();
    fs::remove_all(base);
    return report(8, ok, detail, secs);
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: %s <criterion 1..8>\n", argv[0]);
        return 2;
    }
    const int n = std::atoi(argv[1]);
    switch (n) {
        case 1: return criterion_1();
        case 2: return criterion_2();
        case 3: return criterion_3();
        case 4: return criterion_4();
        case 5: return criterion_5();
        case 6: return criterion_6();
        case 7: return criterion_7();
        case 8: return criterion_8();
        default:
            std::fprintf(stderr, "unknown criterion %d\n", n);
            return 2;
    }
}
