#include "imb/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace imb {

OptimizerKind optimizer_kind_from_string(const std::string& s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adam") return OptimizerKind::adam;
    if (s == "adagrad") return OptimizerKind::adagrad;
    if (s == "adadelta") return OptimizerKind::adadelta;
    throw std::invalid_argument("unknown optimizer: " + s);
}

std::string to_string(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::sgd: return "sgd";
        case OptimizerKind::adam: return "adam";
        case OptimizerKind::adagrad: return "adagrad";
        case OptimizerKind::adadelta: return "adadelta";
    }
    return "?";
}

void optimizer_step(std::span<double> theta, std::span<const double> grad, OptState& state,
                    const OptimizerConfig& cfg, std::span<const std::uint8_t> freeze) {
    const std::size_t n = theta.size();
    if (grad.size() != n) throw std::invalid_argument("optimizer_step: size mismatch");
    if (!freeze.empty() && freeze.size() != n)
        throw std::invalid_argument("optimizer_step: freeze mask size");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(grad[i])) throw std::runtime_error("optimizer_step: non-finite gradient");
    }
    if (cfg.kind != OptimizerKind::sgd && state.acc1.size() != n) state.reset(n);
    state.t += 1;

    auto frozen = [&](std::size_t i) { return !freeze.empty() && freeze[i] != 0; };

    switch (cfg.kind) {
        case OptimizerKind::sgd:
            for (std::size_t i = 0; i < n; ++i) {
                if (frozen(i)) continue;
                theta[i] -= cfg.lr * grad[i];
            }
            break;
        case OptimizerKind::adam: {
            const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
            const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
            for (std::size_t i = 0; i < n; ++i) {
                if (frozen(i)) continue;
                state.acc1[i] = cfg.beta1 * state.acc1[i] + (1.0 - cfg.beta1) * grad[i];
                state.acc2[i] = cfg.beta2 * state.acc2[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
                const double mhat = state.acc1[i] / bc1;
                const double vhat = state.acc2[i] / bc2;
                theta[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
            }
            break;
        }
        case OptimizerKind::adagrad:
            for (std::size_t i = 0; i < n; ++i) {
                if (frozen(i)) continue;
                state.acc1[i] += grad[i] * grad[i];
                theta[i] -= cfg.lr * grad[i] / (std::sqrt(state.acc1[i]) + cfg.eps);
            }
            break;
        case OptimizerKind::adadelta:
            for (std::size_t i = 0; i < n; ++i) {
                if (frozen(i)) continue;
                state.acc1[i] = cfg.rho * state.acc1[i] + (1.0 - cfg.rho) * grad[i] * grad[i];
                const double dx = -std::sqrt((state.acc2[i] + cfg.eps) / (state.acc1[i] + cfg.eps)) *
                                  grad[i];
                state.acc2[i] = cfg.rho * state.acc2[i] + (1.0 - cfg.rho) * dx * dx;
                theta[i] += cfg.lr * dx;
            }
            break;
    }
}

}  // namespace imb
