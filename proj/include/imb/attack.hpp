#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "imb/data.hpp"
#include "imb/net.hpp"

namespace imb {

enum class AttackMode { untargeted, targeted };

struct AttackConfig {
    AttackMode mode = AttackMode::untargeted;
    int steps = 100;
    double step_size = 0.1;
    double max_l2_radius = 3.0;
    int m_att = 8;             // gradient sample count when det_gradient is off
    int target = -1;           // targeted mode
    bool det_gradient = true;  // expectation propagation for the input gradient

    void validate() const;
};

// Projected gradient L2 attack. Ascends the cross-entropy of the true label
// (descends toward the target in targeted mode) using input gradients from a
// deterministic expectation pass, projecting onto the L2 ball around the
// original input and clipping to [0,1] after every step.
Vector l2_attack(const NetworkParams& params, std::span<const double> x, int y_true,
                 const AttackConfig& cfg, RngStream& rng);

struct AttackRow {
    int image_index = 0;
    AttackMode mode = AttackMode::untargeted;
    int target = -1;  // -1 for untargeted
    bool success = false;
    double l2_norm = 0.0;
};

struct RobustnessResult {
    double robustness_pct = 0.0;  // higher = more robust
    double clean_accuracy = 0.0;
    int n_attacked = 0;
    std::vector<AttackRow> rows;
};

// Untargeted: share of originally-correct inputs still classified correctly
// after the attack. Targeted: share of (image, other-label) pairs where the
// attack fails to land on the target. Model decisions use m-sample inference
// with fixed seeds (det_model uses the deterministic pass).
RobustnessResult robustness_eval(const NetworkParams& params, const Dataset& subset,
                                 const AttackConfig& cfg, int eval_m, std::uint64_t eval_seed,
                                 bool det_model = false);

}  // namespace imb
