#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "imb/data.hpp"
#include "imb/exact.hpp"
#include "imb/gradient.hpp"
#include "imb/net.hpp"
#include "imb/objectives.hpp"
#include "imb/optimizer.hpp"

namespace imb {

enum class Algorithm { joint, greedy, mle };

Algorithm algorithm_from_string(const std::string& s);
std::string to_string(Algorithm a);

struct IMBConfig {
    Algorithm algorithm = Algorithm::joint;
    Vector beta;   // per hidden layer 1..L
    Vector gamma;  // per layer 0..L; ignored for mle
    int m_samples = 32;
    Growth growth = Growth::chain;
    OptimizerConfig optimizer;
    int epochs = 1;
    int batch_size = 256;
    std::uint64_t seed = 1;
    int mi_eval_every = 0;  // exact info-plane stride; 0 disables
    bool det_limit = false;
    int error_eval_every = 0;  // 0 = final epoch only
    int eval_repeats = 10;
    int checkpoint_every = 0;  // extra parameter snapshots; final always kept
    std::size_t particle_budget = std::size_t{1} << 20;
    double early_stop_tol = 0.0;  // improvement threshold on the 100-epoch moving average
    int stage_epochs = 0;         // greedy; 0 means epochs / L

    void validate(int n_layers) const;
    ObjectiveWeights weights(int n_layers) const;
};

struct EpochRecord {
    int epoch = 0;
    ObjectiveBreakdown obj;
    double train_error = -1.0;  // negative = not evaluated
    double test_error = -1.0;
    int stage = 0;  // greedy stage index, 0 otherwise
};

struct TrainLog {
    std::vector<EpochRecord> epochs;  // entry 0 is the initialization record
    std::vector<exact::InfoPlanePoint> info_points;
    std::vector<std::string> warnings;
    std::vector<int> stage_starts;  // first epoch of each greedy stage
    std::vector<std::pair<int, NetworkParams>> checkpoints;
    NetworkParams final_params;
    double wall_seconds = 0.0;
};

struct TrainData {
    const Dataset* train = nullptr;
    const Dataset* test = nullptr;      // optional held-out set for error curves
    const Dataset* mi_joint = nullptr;  // optional full joint for exact info-plane points
};

TrainLog train_joint_imb(const TrainData& data, const std::vector<int>& widths,
                         const IMBConfig& cfg);
TrainLog train_greedy_imb(const TrainData& data, const std::vector<int>& widths,
                          const IMBConfig& cfg);
TrainLog train_mle(const TrainData& data, const std::vector<int>& widths, const IMBConfig& cfg);

// Dispatch on cfg.algorithm.
TrainLog train(const TrainData& data, const std::vector<int>& widths, const IMBConfig& cfg);

struct EvalResult {
    double mean_error = 0.0;
    double std_error = 0.0;
    std::vector<double> per_repeat;
};

// Classification error of the argmax of the m-sample Monte-Carlo class
// posterior, repeated with fresh seeds. det_limit propagates probabilities
// instead of samples (one deterministic pass, zero spread).
EvalResult evaluate(const NetworkParams& params, const Dataset& data, int m, int repeats,
                    std::uint64_t seed, bool det_limit = false);

}  // namespace imb
