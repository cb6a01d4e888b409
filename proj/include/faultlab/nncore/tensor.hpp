#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "faultlab/error.hpp"
#include "faultlab/random.hpp"

namespace faultlab::nn {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
struct Tensor2 {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Tensor2() = default;
    Tensor2(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    static Tensor2 from_rows(const std::vector<Vector>& rs) {
        Tensor2 t(rs.size(), rs.empty() ? 0 : rs.front().size());
        for (std::size_t i = 0; i < rs.size(); ++i) {
            require_shape(rs[i].size() == t.cols, "Tensor2::from_rows: ragged rows");
            std::copy(rs[i].begin(), rs[i].end(), t.row(i).begin());
        }
        return t;
    }

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    std::size_t size() const noexcept { return data.size(); }
    bool empty() const noexcept { return data.empty(); }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    friend bool operator==(const Tensor2&, const Tensor2&) = default;
};

inline std::string shape_str(const Tensor2& t) {
    return std::to_string(t.rows) + "x" + std::to_string(t.cols);
}

/// y += W x. Four interleaved partial sums per row; the summation order is
/// fixed, so results are reproducible.
inline void gemv_acc(const Tensor2& w, std::span<const double> x, std::span<double> y) {
    const std::size_t n = w.cols, n4 = n - n % 4;
    for (std::size_t r = 0; r < w.rows; ++r) {
        const double* wr = w.data.data() + r * n;
        double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
        for (std::size_t c = 0; c < n4; c += 4) {
            s0 += wr[c] * x[c];
            s1 += wr[c + 1] * x[c + 1];
            s2 += wr[c + 2] * x[c + 2];
            s3 += wr[c + 3] * x[c + 3];
        }
        for (std::size_t c = n4; c < n; ++c) s0 += wr[c] * x[c];
        y[r] += (s0 + s1) + (s2 + s3);
    }
}

/// x_grad += W^T dy
inline void gemv_t_acc(const Tensor2& w, std::span<const double> dy, std::span<double> x_grad) {
    for (std::size_t r = 0; r < w.rows; ++r) {
        const double* wr = w.data.data() + r * w.cols;
        const double g = dy[r];
        if (g == 0.0) continue;
        for (std::size_t c = 0; c < w.cols; ++c) x_grad[c] += wr[c] * g;
    }
}

/// W_grad += dy x^T
inline void outer_acc(std::span<const double> dy, std::span<const double> x, Tensor2& w_grad) {
    for (std::size_t r = 0; r < w_grad.rows; ++r) {
        const double g = dy[r];
        if (g == 0.0) continue;
        double* wr = w_grad.data.data() + r * w_grad.cols;
        for (std::size_t c = 0; c < w_grad.cols; ++c) wr[c] += g * x[c];
    }
}

inline double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// Uniform in +-1/sqrt(fan_in).
inline void init_uniform(std::span<double> values, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in == 0 ? 1 : fan_in));
    for (double& v : values) v = uniform(rng, -bound, bound);
}

/// Mutable views over every trainable array of a model, in a fixed order.
using ParamViews = std::vector<std::span<double>>;

inline std::size_t total_size(const ParamViews& views) {
    std::size_t n = 0;
    for (auto v : views) n += v.size();
    return n;
}

inline void zero(const ParamViews& views) {
    for (auto v : views) std::fill(v.begin(), v.end(), 0.0);
}

}  // namespace faultlab::nn
