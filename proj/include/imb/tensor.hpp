#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace imb {

using Vector = std::vector<double>;

// Dense row-major matrix. Small enough that we hand-roll the few kernels
// we need (matvec, transposed matvec, outer-product accumulate).
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0)
        : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

    std::span<double> row(int r) {
        return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
    }
    std::span<const double> row(int r) const {
        return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
    }

    std::size_t size() const { return data.size(); }
};

inline void check_dim(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("dimension mismatch: " + what);
}

// y = A x
inline void matvec_into(const Matrix& a, std::span<const double> x, std::span<double> y) {
    check_dim(static_cast<int>(x.size()) == a.cols && static_cast<int>(y.size()) == a.rows,
              "matvec " + std::to_string(a.rows) + "x" + std::to_string(a.cols));
    const double* p = a.data.data();
    for (int r = 0; r < a.rows; ++r) {
        double acc = 0.0;
        for (int c = 0; c < a.cols; ++c) acc += p[c] * x[c];
        y[r] = acc;
        p += a.cols;
    }
}

// y += A^T x
inline void matvec_transposed_add(const Matrix& a, std::span<const double> x, std::span<double> y) {
    check_dim(static_cast<int>(x.size()) == a.rows && static_cast<int>(y.size()) == a.cols,
              "matvec_t " + std::to_string(a.rows) + "x" + std::to_string(a.cols));
    const double* p = a.data.data();
    for (int r = 0; r < a.rows; ++r) {
        const double xr = x[r];
        if (xr != 0.0) {
            for (int c = 0; c < a.cols; ++c) y[c] += p[c] * xr;
        }
        p += a.cols;
    }
}

// A += scale * u v^T
inline void outer_add(Matrix& a, std::span<const double> u, std::span<const double> v,
                      double scale = 1.0) {
    check_dim(static_cast<int>(u.size()) == a.rows && static_cast<int>(v.size()) == a.cols,
              "outer " + std::to_string(a.rows) + "x" + std::to_string(a.cols));
    double* p = a.data.data();
    for (int r = 0; r < a.rows; ++r) {
        const double ur = u[r] * scale;
        if (ur != 0.0) {
            for (int c = 0; c < a.cols; ++c) p[c] += ur * v[c];
        }
        p += a.cols;
    }
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    check_dim(x.size() == y.size(), "axpy");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace imb
