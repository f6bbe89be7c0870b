// imb-lab: train and probe Information Multi-Bottleneck networks.
//
// Subcommands: train, eval, info-plane, probe-conflict, attack, gen-data.
// Exit codes: 0 success, 1 runtime failure, 2 invalid config or input,
// 3 architecture not enumerable (info-plane only).

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "imb/attack.hpp"
#include "imb/checkpoint.hpp"
#include "imb/data.hpp"
#include "imb/exact.hpp"
#include "imb/report.hpp"
#include "imb/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace imb;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---- strict schema validation -------------------------------------------

void reject_unknown(const json& obj, const std::set<std::string>& known,
                    const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!known.count(it.key()))
            throw ConfigError("unknown key \"" + it.key() + "\" in " + where);
    }
}

Vector number_or_list(const json& v, int n, const std::string& what) {
    Vector out;
    if (v.is_number()) {
        out.assign(n, v.get<double>());
    } else if (v.is_array()) {
        out = v.get<Vector>();
        if (static_cast<int>(out.size()) != n)
            throw ConfigError(what + " needs " + std::to_string(n) + " entries, got " +
                              std::to_string(out.size()));
    } else {
        throw ConfigError(what + " must be a number or a list");
    }
    return out;
}

// ---- run configuration ----------------------------------------------------

struct RunConfig {
    json doc;  // resolved snapshot written next to the artifacts

    // dataset
    std::string kind;  // synthetic | mnist | csv
    int n_bits = 12;
    std::uint64_t data_seed = 1;
    std::string images, labels, test_images, test_labels, csv_path;
    int csv_classes = 2;
    double holdout_fraction = 0.0;
    int subset = 0;

    std::vector<int> widths;
    IMBConfig train;
    std::string out_dir;
    bool plots = false;
};

RunConfig parse_run_config(const json& doc) {
    RunConfig rc;
    rc.doc = doc;
    reject_unknown(doc, {"dataset", "arch", "train", "out_dir", "plots"}, "config");

    const json& ds = doc.at("dataset");
    reject_unknown(ds,
                   {"kind", "n_bits", "seed", "images", "labels", "test_images", "test_labels",
                    "path", "n_classes", "holdout_fraction", "subset"},
                   "dataset");
    rc.kind = ds.at("kind").get<std::string>();
    if (rc.kind != "synthetic" && rc.kind != "mnist" && rc.kind != "csv")
        throw ConfigError("dataset.kind must be synthetic, mnist or csv");
    rc.n_bits = ds.value("n_bits", 12);
    rc.data_seed = ds.value("seed", 1ull);
    rc.images = ds.value("images", "");
    rc.labels = ds.value("labels", "");
    rc.test_images = ds.value("test_images", "");
    rc.test_labels = ds.value("test_labels", "");
    rc.csv_path = ds.value("path", "");
    rc.csv_classes = ds.value("n_classes", 2);
    rc.holdout_fraction = ds.value("holdout_fraction", 0.0);
    rc.subset = ds.value("subset", 0);

    const json& arch = doc.at("arch");
    reject_unknown(arch, {"widths"}, "arch");
    rc.widths = arch.at("widths").get<std::vector<int>>();
    if (rc.widths.empty()) throw ConfigError("arch.widths must not be empty");
    const int n_layers = static_cast<int>(rc.widths.size());

    const json& tr = doc.at("train");
    reject_unknown(tr,
                   {"algorithm", "beta", "gamma", "m_samples", "growth", "optimizer", "epochs",
                    "batch_size", "seed", "mi_eval_every", "det_limit", "error_eval_every",
                    "eval_repeats", "checkpoint_every", "stage_epochs", "early_stop_tol",
                    "particle_budget"},
                   "train");
    rc.train.algorithm = algorithm_from_string(tr.value("algorithm", std::string("joint")));
    rc.train.beta = number_or_list(tr.value("beta", json(1e-4)), n_layers, "train.beta");
    rc.train.gamma = number_or_list(tr.value("gamma", json(1.0)), n_layers + 1, "train.gamma");
    rc.train.m_samples = tr.value("m_samples", 32);
    const std::string growth = tr.value("growth", std::string("chain"));
    if (growth != "chain" && growth != "tree") throw ConfigError("train.growth: chain or tree");
    rc.train.growth = growth == "chain" ? Growth::chain : Growth::tree;
    if (tr.contains("optimizer")) {
        const json& opt = tr.at("optimizer");
        reject_unknown(opt, {"kind", "lr", "beta1", "beta2", "eps", "rho"}, "train.optimizer");
        rc.train.optimizer.kind = optimizer_kind_from_string(opt.value("kind", std::string("sgd")));
        rc.train.optimizer.lr = opt.value("lr", rc.train.optimizer.lr);
        rc.train.optimizer.beta1 = opt.value("beta1", rc.train.optimizer.beta1);
        rc.train.optimizer.beta2 = opt.value("beta2", rc.train.optimizer.beta2);
        rc.train.optimizer.eps = opt.value("eps", rc.train.optimizer.eps);
        rc.train.optimizer.rho = opt.value("rho", rc.train.optimizer.rho);
    }
    rc.train.epochs = tr.value("epochs", 1);
    rc.train.batch_size = tr.value("batch_size", 256);
    rc.train.seed = tr.value("seed", 1ull);
    rc.train.mi_eval_every = tr.value("mi_eval_every", 0);
    rc.train.det_limit = tr.value("det_limit", false);
    rc.train.error_eval_every = tr.value("error_eval_every", 0);
    rc.train.eval_repeats = tr.value("eval_repeats", 10);
    rc.train.checkpoint_every = tr.value("checkpoint_every", 0);
    rc.train.stage_epochs = tr.value("stage_epochs", 0);
    rc.train.early_stop_tol = tr.value("early_stop_tol", 0.0);
    rc.train.particle_budget = tr.value("particle_budget", std::size_t{1} << 20);

    rc.out_dir = doc.value("out_dir", std::string("imb-run"));
    rc.plots = doc.value("plots", false);
    return rc;
}

std::string mnist_dir() {
    if (const char* env = std::getenv("IMB_MNIST_DIR")) return env;
    return "data/mnist";
}

json preset_config(const std::string& name) {
    json doc;
    if (name == "toy-12bit") {
        doc = {
            {"dataset",
             {{"kind", "synthetic"}, {"n_bits", 12}, {"seed", 1}, {"holdout_fraction", 0.2}}},
            {"arch", {{"widths", {10, 8, 6, 4}}}},
            {"train",
             {{"algorithm", "joint"},
              {"beta", 1e-4},
              {"gamma", 1.0},
              {"m_samples", 2},
              {"growth", "tree"},
              {"optimizer", {{"kind", "sgd"}, {"lr", 1.0}}},
              {"epochs", 5000},
              {"batch_size", 64},
              {"seed", 1},
              {"mi_eval_every", 50},
              {"eval_repeats", 10}}},
            {"out_dir", "runs/toy-12bit"},
            {"plots", true},
        };
    } else if (name == "mnist-small") {
        doc = {
            {"dataset",
             {{"kind", "mnist"},
              {"images", mnist_dir() + "/train-images-idx3-ubyte"},
              {"labels", mnist_dir() + "/train-labels-idx1-ubyte"},
              {"test_images", mnist_dir() + "/t10k-images-idx3-ubyte"},
              {"test_labels", mnist_dir() + "/t10k-labels-idx1-ubyte"},
              {"subset", 10000}}},
            {"arch", {{"widths", {128, 128}}}},
            {"train",
             {{"algorithm", "joint"},
              {"beta", 1e-4},
              {"gamma", 1.0},
              {"m_samples", 8},
              {"growth", "chain"},
              {"optimizer", {{"kind", "adam"}, {"lr", 1e-3}}},
              {"epochs", 20},
              {"batch_size", 128},
              {"seed", 1},
              {"eval_repeats", 10}}},
            {"out_dir", "runs/mnist-small"},
            {"plots", false},
        };
    } else if (name == "mnist-512x512") {
        // the full-scale classification setup; hours of compute
        doc = {
            {"dataset",
             {{"kind", "mnist"},
              {"images", mnist_dir() + "/train-images-idx3-ubyte"},
              {"labels", mnist_dir() + "/train-labels-idx1-ubyte"},
              {"test_images", mnist_dir() + "/t10k-images-idx3-ubyte"},
              {"test_labels", mnist_dir() + "/t10k-labels-idx1-ubyte"},
              {"holdout_fraction", 1.0 / 6.0}}},
            {"arch", {{"widths", {512, 512}}}},
            {"train",
             {{"algorithm", "joint"},
              {"beta", 1e-4},
              {"gamma", 1.0},
              {"m_samples", 32},
              {"growth", "chain"},
              {"optimizer", {{"kind", "adadelta"}, {"lr", 1.0}}},
              {"epochs", 100},
              {"batch_size", 128},
              {"seed", 1},
              {"eval_repeats", 10}}},
            {"out_dir", "runs/mnist-512x512"},
            {"plots", false},
        };
    } else {
        throw ConfigError("unknown preset: " + name +
                          " (available: toy-12bit, mnist-small, mnist-512x512)");
    }
    return doc;
}

struct LoadedData {
    Dataset full;  // synthetic full-support set (joint source)
    Dataset train;
    Dataset holdout;
    Dataset test;
    bool has_holdout = false;
    bool has_test = false;
    bool enumerable_joint = false;
};

LoadedData load_data(const RunConfig& rc) {
    LoadedData d;
    Dataset base;
    if (rc.kind == "synthetic") {
        d.full = gen_binary_task(rc.data_seed, rc.n_bits);
        base = rc.subset > 0 ? head_subset(d.full, rc.subset) : d.full;
        d.enumerable_joint = true;
    } else if (rc.kind == "mnist") {
        for (const std::string& p : {rc.images, rc.labels}) {
            if (p.empty() || !fs::exists(p))
                throw ConfigError("dataset file not found: " + (p.empty() ? "(unset)" : p));
        }
        base = load_mnist_idx(rc.images, rc.labels);
        if (rc.subset > 0) base = head_subset(base, rc.subset);
        if (!rc.test_images.empty()) {
            if (!fs::exists(rc.test_images) || !fs::exists(rc.test_labels))
                throw ConfigError("test dataset file not found: " + rc.test_images);
            d.test = load_mnist_idx(rc.test_images, rc.test_labels);
            d.has_test = true;
        }
    } else {
        if (!fs::exists(rc.csv_path)) throw ConfigError("dataset file not found: " + rc.csv_path);
        base = load_csv_dataset(rc.csv_path, rc.csv_classes);
        if (rc.subset > 0) base = head_subset(base, rc.subset);
    }
    if (rc.holdout_fraction > 0.0) {
        SplitResult s = split_dataset(base, rc.holdout_fraction, rc.data_seed);
        d.train = std::move(s.train);
        d.holdout = std::move(s.holdout);
        d.has_holdout = true;
    } else {
        d.train = std::move(base);
    }
    return d;
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << content;
}

// ---- train ---------------------------------------------------------------

int cmd_train(const RunConfig& rc) {
    const LoadedData data = load_data(rc);  // fails before any output exists

    TrainData td;
    td.train = &data.train;
    td.test = data.has_test ? &data.test : (data.has_holdout ? &data.holdout : nullptr);
    td.mi_joint = data.enumerable_joint ? &data.full : nullptr;

    std::cout << "training " << to_string(rc.train.algorithm) << " on " << data.train.size()
              << " examples, widths";
    for (int w : rc.widths) std::cout << " " << w;
    std::cout << ", seed " << rc.train.seed << std::endl;

    const TrainLog log = train(td, rc.widths, rc.train);

    const fs::path out(rc.out_dir);
    fs::create_directories(out);
    write_text(out / "config_snapshot.json", rc.doc.dump(2) + "\n");
    write_train_log_csv((out / "trainlog.csv").string(), log);
    if (!log.info_points.empty()) {
        write_info_plane_csv((out / "info_plane.csv").string(), log.info_points);
        if (rc.plots)
            write_text(out / "info_plane.svg", render_info_plane_svg(log.info_points));
    }
    for (const auto& [epoch, params] : log.checkpoints) {
        const std::string name = epoch == log.epochs.back().epoch
                                     ? "checkpoint_final.imbckpt"
                                     : "checkpoint_epoch" + std::to_string(epoch) + ".imbckpt";
        save_checkpoint((out / name).string(), params, rc.doc, epoch);
    }
    if (!log.warnings.empty()) {
        std::string w;
        for (const auto& s : log.warnings) w += s + "\n";
        write_text(out / "warnings.txt", w);
    }
    json metrics;
    metrics["wall_seconds"] = log.wall_seconds;
    metrics["final_epoch"] = log.epochs.back().epoch;
    metrics["final_objective"] = log.epochs.back().obj.total;
    metrics["final_train_error"] = log.epochs.back().train_error;
    if (log.epochs.back().test_error >= 0.0)
        metrics["final_test_error"] = log.epochs.back().test_error;
    write_text(out / "metrics.json", metrics.dump(2) + "\n");

    std::cout << "final objective " << log.epochs.back().obj.total << ", train error "
              << log.epochs.back().train_error;
    if (log.epochs.back().test_error >= 0.0)
        std::cout << ", test error " << log.epochs.back().test_error;
    std::cout << "\nartifacts in " << out.string() << std::endl;
    return 0;
}

// ---- eval ------------------------------------------------------------------

int cmd_eval(const std::string& checkpoint_path, const RunConfig& rc, int m, int repeats,
             bool det, std::uint64_t seed) {
    const Checkpoint cp = load_checkpoint(checkpoint_path);
    const LoadedData data = load_data(rc);
    const Dataset& eval_set = data.has_test ? data.test : data.train;
    if (eval_set.inputs.cols != cp.params.input_dim)
        throw ConfigError("checkpoint expects input dim " + std::to_string(cp.params.input_dim) +
                          ", dataset has " + std::to_string(eval_set.inputs.cols));
    const int use_m = m > 0 ? m : 32;
    const EvalResult r = evaluate(cp.params, eval_set, use_m, repeats, seed, det);
    std::cout << "error " << 100.0 * r.mean_error << "% +- " << 100.0 * r.std_error << "% ("
              << repeats << " repeats, M=" << use_m << ", " << eval_set.size() << " examples)\n";
    return 0;
}

// ---- info-plane ------------------------------------------------------------

std::vector<std::pair<int, Checkpoint>> load_run_checkpoints(const fs::path& dir) {
    std::vector<std::pair<int, Checkpoint>> cps;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("checkpoint_", 0) == 0 && entry.path().extension() == ".imbckpt") {
            Checkpoint cp = load_checkpoint(entry.path().string());
            cps.emplace_back(cp.epoch, std::move(cp));
        }
    }
    std::sort(cps.begin(), cps.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return cps;
}

int info_plane_for_run(const fs::path& run_dir, bool plots) {
    auto cps = load_run_checkpoints(run_dir);
    if (cps.empty()) throw ConfigError("no checkpoints in " + run_dir.string());

    const json& snap = cps.front().second.config;
    if (!snap.contains("dataset") || snap["dataset"].value("kind", "") != "synthetic") {
        std::cerr << "info-plane: dataset joint not enumerable (synthetic runs only)\n";
        return 3;
    }
    const RunConfig rc = parse_run_config(snap);
    const Dataset full = gen_binary_task(rc.data_seed, rc.n_bits);

    std::vector<std::pair<int, const NetworkParams*>> views;
    views.reserve(cps.size());
    for (const auto& [epoch, cp] : cps) views.emplace_back(epoch, &cp.params);
    const auto res = exact::info_plane_trace(views, full.inputs, full.px, full.py_given_x);
    write_info_plane_csv((run_dir / "info_plane.csv").string(), res.points);
    if (plots) write_text(run_dir / "info_plane.svg", render_info_plane_svg(res.points));
    for (const auto& v : res.dpi_violations) std::cerr << "dpi violation: " << v << "\n";
    std::cout << "wrote " << (run_dir / "info_plane.csv").string() << " (" << res.points.size()
              << " points)\n";
    return 0;
}

int cmd_info_plane(const std::string& dir, bool plots) {
    const fs::path root(dir);
    if (!fs::exists(root)) throw ConfigError("no such directory: " + dir);

    // A run directory holds checkpoints directly; a sweep directory holds
    // several run directories whose traces are additionally averaged
    // pointwise across seeds.
    bool direct = false;
    for (const auto& e : fs::directory_iterator(root)) {
        if (e.path().extension() == ".imbckpt") direct = true;
    }
    if (direct) return info_plane_for_run(root, plots);

    std::vector<fs::path> runs;
    for (const auto& e : fs::directory_iterator(root)) {
        if (e.is_directory()) {
            for (const auto& inner : fs::directory_iterator(e.path())) {
                if (inner.path().extension() == ".imbckpt") {
                    runs.push_back(e.path());
                    break;
                }
            }
        }
    }
    if (runs.empty()) throw ConfigError("no checkpoints under " + dir);
    std::sort(runs.begin(), runs.end());

    std::map<std::pair<int, int>, std::pair<Vector, Vector>> buckets;
    for (const auto& run : runs) {
        const int code = info_plane_for_run(run, plots);
        if (code != 0) return code;
        for (const auto& p : read_info_plane_csv((run / "info_plane.csv").string())) {
            auto& b = buckets[{p.epoch, p.layer}];
            b.first.push_back(p.i_zx_bits);
            b.second.push_back(p.i_zy_bits);
        }
    }
    std::vector<exact::InfoPlanePoint> mean_points;
    for (const auto& [key, vals] : buckets) {
        exact::InfoPlanePoint p;
        p.epoch = key.first;
        p.layer = key.second;
        for (double v : vals.first) p.i_zx_bits += v;
        for (double v : vals.second) p.i_zy_bits += v;
        p.i_zx_bits /= static_cast<double>(vals.first.size());
        p.i_zy_bits /= static_cast<double>(vals.second.size());
        mean_points.push_back(p);
    }
    write_info_plane_csv((root / "mean_info_plane.csv").string(), mean_points);
    if (plots) write_text(root / "mean_info_plane.svg", render_info_plane_svg(mean_points));
    std::cout << "wrote " << (root / "mean_info_plane.csv").string() << " over " << runs.size()
              << " runs\n";
    return 0;
}

// ---- probe-conflict ---------------------------------------------------------

int cmd_probe(const std::string& instance, const std::string& spec_path, double beta1,
              double beta2, int grid, const std::string& out_path) {
    Matrix pxy;
    exact::ProbeConfig cfg;
    cfg.beta1 = beta1;
    cfg.beta2 = beta2;
    cfg.grid = grid;

    if (!spec_path.empty()) {
        std::ifstream f(spec_path);
        if (!f) throw ConfigError("cannot open " + spec_path);
        json doc;
        try {
            doc = json::parse(f);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("malformed probe spec: ") + e.what());
        }
        reject_unknown(doc, {"pxy", "channel2"}, "probe spec");
        const auto rows = doc.at("pxy").get<std::vector<Vector>>();
        pxy = Matrix(static_cast<int>(rows.size()), static_cast<int>(rows.at(0).size()));
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (std::size_t c = 0; c < rows[r].size(); ++c)
                pxy.at(static_cast<int>(r), static_cast<int>(c)) = rows[r][c];
        const std::string ch = doc.value("channel2", std::string("full_grid"));
        if (ch == "full_grid") cfg.mode = exact::Channel2Mode::full_grid;
        else if (ch == "fixed_copy") cfg.mode = exact::Channel2Mode::fixed_copy;
        else if (ch == "constant_family") cfg.mode = exact::Channel2Mode::constant_family;
        else throw ConfigError("channel2 must be full_grid, fixed_copy or constant_family");
    } else {
        pxy = exact::builtin_probe_joint();
        if (instance == "generic") cfg.mode = exact::Channel2Mode::full_grid;
        else if (instance == "sufficient") cfg.mode = exact::Channel2Mode::fixed_copy;
        else if (instance == "independence") cfg.mode = exact::Channel2Mode::constant_family;
        else throw ConfigError("instance must be generic, sufficient or independence");
    }

    const exact::ProbeReport rep = exact::conflict_probe(pxy, cfg);
    std::cout << "verdict: " << rep.verdict << "\n";
    if (!out_path.empty()) {
        write_text(out_path, rep.to_json());
        std::cout << "report written to " << out_path << "\n";
    }
    return 0;
}

// ---- attack -----------------------------------------------------------------

int cmd_attack(const std::string& checkpoint_path, const RunConfig& rc, AttackConfig acfg,
               int subset, int eval_m, std::uint64_t seed, bool det_model,
               const std::string& out_path) {
    const Checkpoint cp = load_checkpoint(checkpoint_path);
    const LoadedData data = load_data(rc);
    const Dataset& base = data.has_test ? data.test : data.train;
    if (base.inputs.cols != cp.params.input_dim)
        throw ConfigError("checkpoint/dataset dimension mismatch");
    const Dataset sub = subset > 0 && subset < base.size() ? head_subset(base, subset) : base;

    const RobustnessResult r = robustness_eval(cp.params, sub, acfg, eval_m, seed, det_model);
    std::cout << (acfg.mode == AttackMode::targeted ? "targeted" : "untargeted") << " robustness "
              << r.robustness_pct << "% over " << r.n_attacked << " attacks (clean accuracy "
              << 100.0 * r.clean_accuracy << "%)\n";
    if (!out_path.empty()) {
        write_attack_csv(out_path, r.rows);
        std::cout << "report written to " << out_path << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"imb-lab: information multi-bottleneck training lab"};
    app.require_subcommand(1);

    std::string config_path, preset, out_dir, algorithm;
    std::int64_t seed = -1;
    int epochs = -1, m_samples = -1;

    auto add_config_opts = [&](CLI::App* cmd, bool with_out) {
        cmd->add_option("--config", config_path, "JSON run configuration");
        cmd->add_option("--preset", preset,
                        "builtin preset (toy-12bit, mnist-small, mnist-512x512)");
        cmd->add_option("--seed", seed, "override train.seed");
        if (with_out) cmd->add_option("--out", out_dir, "override out_dir");
        cmd->add_option("--epochs", epochs, "override train.epochs");
        cmd->add_option("--algorithm", algorithm, "override train.algorithm (joint|greedy|mle)");
        cmd->add_option("--m-samples", m_samples, "override train.m_samples");
    };

    CLI::App* c_train = app.add_subcommand("train", "train a model and write artifacts");
    add_config_opts(c_train, true);

    CLI::App* c_eval = app.add_subcommand("eval", "evaluate a checkpoint");
    std::string eval_ckpt;
    int eval_m = 0, eval_repeats = 10;
    bool eval_det = false;
    std::int64_t eval_seed = 7;
    c_eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    add_config_opts(c_eval, false);
    c_eval->add_option("--m", eval_m, "Monte-Carlo samples per input (default 32)");
    c_eval->add_option("--repeats", eval_repeats, "inference repeats (default 10)");
    c_eval->add_flag("--det", eval_det, "deterministic-limit inference");
    c_eval->add_option("--eval-seed", eval_seed, "inference seed");

    CLI::App* c_ip = app.add_subcommand("info-plane", "exact info-plane trace from checkpoints");
    std::string ip_dir;
    bool ip_plots = false;
    c_ip->add_option("--run", ip_dir, "run directory (or directory of run directories)")
        ->required();
    c_ip->add_flag("--plots", ip_plots, "emit SVG scatter plots");

    CLI::App* c_probe = app.add_subcommand("probe-conflict", "bottleneck-objective conflict probe on a small system");
    std::string probe_instance = "generic", probe_spec, probe_out;
    double beta1 = 2.0, beta2 = 2.0;
    int grid = 21;
    c_probe->add_option("--instance", probe_instance, "generic | sufficient | independence");
    c_probe->add_option("--spec", probe_spec, "JSON file with pxy and channel2 mode");
    c_probe->add_option("--beta1", beta1, "multiplier of the first bottleneck");
    c_probe->add_option("--beta2", beta2, "multiplier of the second bottleneck");
    c_probe->add_option("--grid", grid, "points per simplex coordinate (default 21)");
    c_probe->add_option("--out", probe_out, "report JSON path");

    CLI::App* c_attack = app.add_subcommand("attack", "L2 attack report for a checkpoint");
    std::string atk_ckpt, atk_out, atk_mode = "untargeted";
    int atk_steps = 100, atk_subset = 1000, atk_eval_m = 32;
    double atk_step_size = 0.25, atk_radius = 3.0;
    std::int64_t atk_seed = 11;
    bool atk_det = false;
    c_attack->add_option("--checkpoint", atk_ckpt, "checkpoint file")->required();
    add_config_opts(c_attack, false);
    c_attack->add_option("--mode", atk_mode, "untargeted | targeted");
    c_attack->add_option("--steps", atk_steps, "attack iterations");
    c_attack->add_option("--step-size", atk_step_size, "L2 step size");
    c_attack->add_option("--radius", atk_radius, "L2 ball radius");
    c_attack->add_option("--subset", atk_subset, "attack the first N examples (default 1000)");
    c_attack->add_option("--eval-m", atk_eval_m, "samples per decision");
    c_attack->add_option("--attack-seed", atk_seed, "attack/inference seed");
    c_attack->add_flag("--det", atk_det, "deterministic-limit model decisions");
    c_attack->add_option("--out", atk_out, "report CSV path");

    CLI::App* c_gen = app.add_subcommand("gen-data", "emit the synthetic task as CSV");
    int gen_bits = 12;
    std::int64_t gen_seed = 1;
    std::string gen_out = "task.csv";
    c_gen->add_option("--n-bits", gen_bits, "input bits (default 12)");
    c_gen->add_option("--seed", gen_seed, "task seed");
    c_gen->add_option("--out", gen_out, "output CSV path");

    CLI11_PARSE(app, argc, argv);

    try {
        json doc;
        const bool needs_config = c_train->parsed() || c_eval->parsed() || c_attack->parsed();
        if (needs_config) {
            if (!config_path.empty()) {
                std::ifstream f(config_path);
                if (!f) throw ConfigError("cannot open config " + config_path);
                try {
                    doc = json::parse(f);
                } catch (const json::parse_error& e) {
                    throw ConfigError(std::string("config parse error: ") + e.what());
                }
            } else if (!preset.empty()) {
                doc = preset_config(preset);
            } else {
                throw ConfigError("need --config or --preset");
            }
            if (seed >= 0) doc["train"]["seed"] = seed;
            if (!out_dir.empty()) doc["out_dir"] = out_dir;
            if (epochs >= 0) doc["train"]["epochs"] = epochs;
            if (!algorithm.empty()) doc["train"]["algorithm"] = algorithm;
            if (m_samples > 0) doc["train"]["m_samples"] = m_samples;
        }

        if (c_train->parsed()) return cmd_train(parse_run_config(doc));
        if (c_eval->parsed())
            return cmd_eval(eval_ckpt, parse_run_config(doc), eval_m, eval_repeats, eval_det,
                            static_cast<std::uint64_t>(eval_seed));
        if (c_ip->parsed()) return cmd_info_plane(ip_dir, ip_plots);
        if (c_probe->parsed())
            return cmd_probe(probe_instance, probe_spec, beta1, beta2, grid, probe_out);
        if (c_attack->parsed()) {
            AttackConfig acfg;
            if (atk_mode == "targeted") {
                acfg.mode = AttackMode::targeted;
                acfg.target = 0;  // per-pair targets assigned by robustness_eval
            } else if (atk_mode != "untargeted") {
                throw ConfigError("mode must be targeted or untargeted");
            }
            acfg.steps = atk_steps;
            acfg.step_size = atk_step_size;
            acfg.max_l2_radius = atk_radius;
            return cmd_attack(atk_ckpt, parse_run_config(doc), acfg, atk_subset, atk_eval_m,
                              static_cast<std::uint64_t>(atk_seed), atk_det, atk_out);
        }
        if (c_gen->parsed()) {
            const Dataset d = gen_binary_task(static_cast<std::uint64_t>(gen_seed), gen_bits);
            export_dataset_csv(d, gen_out);
            std::cout << "wrote " << gen_out << " (" << d.size() << " rows)\n";
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
