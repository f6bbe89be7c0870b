#pragma once

#include <cmath>
#include <span>

#include "imb/tensor.hpp"

namespace imb {

inline constexpr double kNatsToBits = 1.4426950408889634;  // 1/ln(2)
inline constexpr double kProbFloor = 1e-12;

// Numerically stable logistic: never forms exp of a large positive argument.
inline double sigmoid(double a) {
    if (a >= 0.0) {
        return 1.0 / (1.0 + std::exp(-a));
    }
    const double e = std::exp(a);
    return e / (1.0 + e);
}

// sigma'(a) expressed through p = sigma(a).
inline double sigmoid_prime_from_p(double p) { return p * (1.0 - p); }

// In-place softmax with max subtraction.
inline void softmax_inplace(std::span<double> logits) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double sum = 0.0;
    for (double& v : logits) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : logits) v /= sum;
}

// x log x with the 0 log 0 := 0 convention.
inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

// x log(x/y) with 0 log 0 := 0; caller guarantees y > 0 whenever x > 0.
inline double xlogx_over(double x, double y) { return x > 0.0 ? x * std::log(x / y) : 0.0; }

inline bool all_finite(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace imb
