#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "imb/tensor.hpp"

namespace imb {

enum class OptimizerKind { sgd, adam, adagrad, adadelta };

OptimizerKind optimizer_kind_from_string(const std::string& s);
std::string to_string(OptimizerKind k);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::sgd;
    double lr = 0.1;
    double beta1 = 0.9;    // adam
    double beta2 = 0.999;  // adam
    double eps = 1e-8;     // adam / adagrad / adadelta
    double rho = 0.95;     // adadelta decay
};

struct OptState {
    std::int64_t t = 0;
    Vector acc1;  // adam m / adagrad sum / adadelta E[g^2]
    Vector acc2;  // adam v / adadelta E[dx^2]

    void reset(std::size_t n) {
        t = 0;
        acc1.assign(n, 0.0);
        acc2.assign(n, 0.0);
    }
};

// Canonical update rules. freeze: optional mask, entries with mask != 0 are
// left untouched (their accumulators too). Throws on non-finite gradients.
void optimizer_step(std::span<double> theta, std::span<const double> grad, OptState& state,
                    const OptimizerConfig& cfg, std::span<const std::uint8_t> freeze = {});

}  // namespace imb
