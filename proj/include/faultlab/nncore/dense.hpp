#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

#include "faultlab/nncore/tensor.hpp"

namespace faultlab::nn {

enum class Activation { identity, softmax, sigmoid, tanh };

inline std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::softmax: return "softmax";
        case Activation::sigmoid: return "sigmoid";
        case Activation::tanh: return "tanh";
    }
    return "identity";
}

inline Activation activation_from_string(std::string_view s) {
    if (s == "identity") return Activation::identity;
    if (s == "softmax") return Activation::softmax;
    if (s == "sigmoid") return Activation::sigmoid;
    if (s == "tanh") return Activation::tanh;
    throw ParseError("unknown activation '" + std::string(s) + "'");
}

struct DenseParams {
    Tensor2 w;  // out x in
    Vector b;   // out
    Activation activation = Activation::identity;

    DenseParams() = default;
    DenseParams(std::size_t in, std::size_t out, Activation act) : w(out, in), b(out, 0.0), activation(act) {}

    std::size_t in_dim() const noexcept { return w.cols; }
    std::size_t out_dim() const noexcept { return w.rows; }

    void init(Rng& rng) {
        init_uniform(w.data, in_dim(), rng);
        init_uniform(b, in_dim(), rng);
    }

    void append_views(ParamViews& out) {
        out.emplace_back(w.data);
        out.emplace_back(b);
    }

    friend bool operator==(const DenseParams&, const DenseParams&) = default;
};

/// Numerically stable softmax (max-shifted).
inline void softmax_inplace(std::span<double> z) {
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double& v : z) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : z) v /= sum;
}

inline Vector dense_logits(std::span<const double> x, const DenseParams& p) {
    require_shape(x.size() == p.in_dim(), "dense_forward: input has " + std::to_string(x.size()) +
                                              " values, expected " + std::to_string(p.in_dim()));
    Vector y(p.b);
    gemv_acc(p.w, x, y);
    return y;
}

inline void apply_activation(std::span<double> y, Activation a) {
    switch (a) {
        case Activation::identity: break;
        case Activation::softmax: softmax_inplace(y); break;
        case Activation::sigmoid:
            for (double& v : y) v = sigmoid(v);
            break;
        case Activation::tanh:
            for (double& v : y) v = std::tanh(v);
            break;
    }
}

inline Vector dense_forward(std::span<const double> x, const DenseParams& p) {
    Vector y = dense_logits(x, p);
    apply_activation(y, p.activation);
    return y;
}

/// Maps dLoss/dy to dLoss/dz (pre-activation) given the activated output y.
inline Vector activation_backward(std::span<const double> y, std::span<const double> dy, Activation a) {
    Vector dz(y.size());
    switch (a) {
        case Activation::identity: std::copy(dy.begin(), dy.end(), dz.begin()); break;
        case Activation::softmax: {
            double dot = 0.0;
            for (std::size_t k = 0; k < y.size(); ++k) dot += dy[k] * y[k];
            for (std::size_t k = 0; k < y.size(); ++k) dz[k] = y[k] * (dy[k] - dot);
            break;
        }
        case Activation::sigmoid:
            for (std::size_t k = 0; k < y.size(); ++k) dz[k] = dy[k] * y[k] * (1.0 - y[k]);
            break;
        case Activation::tanh:
            for (std::size_t k = 0; k < y.size(); ++k) dz[k] = dy[k] * (1.0 - y[k] * y[k]);
            break;
    }
    return dz;
}

/// Accumulates parameter gradients for pre-activation gradient `dz`; adds dLoss/dx into `dx`.
inline void dense_backward_pre(std::span<const double> x, std::span<const double> dz, const DenseParams& p,
                               DenseParams& grad, std::span<double> dx) {
    outer_acc(dz, x, grad.w);
    for (std::size_t k = 0; k < dz.size(); ++k) grad.b[k] += dz[k];
    if (!dx.empty()) gemv_t_acc(p.w, dz, dx);
}

}  // namespace faultlab::nn
