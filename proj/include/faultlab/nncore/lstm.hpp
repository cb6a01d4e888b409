#pragma once

#include <cmath>
#include <string>

#include "faultlab/nncore/tensor.hpp"

namespace faultlab::nn {

/// One LSTM cell. Gate blocks are stacked [input, forget, candidate, output],
/// each hidden_size rows.
struct LstmCellParams {
    Tensor2 w_input;   // 4H x D
    Tensor2 w_hidden;  // 4H x H
    Vector bias;       // 4H
    std::size_t hidden_size = 0;

    LstmCellParams() = default;
    LstmCellParams(std::size_t input_dim, std::size_t hidden)
        : w_input(4 * hidden, input_dim), w_hidden(4 * hidden, hidden), bias(4 * hidden, 0.0), hidden_size(hidden) {}

    std::size_t input_dim() const noexcept { return w_input.cols; }

    void init(Rng& rng) {
        init_uniform(w_input.data, input_dim(), rng);
        init_uniform(w_hidden.data, hidden_size, rng);
        init_uniform(bias, hidden_size, rng);
    }

    void validate() const {
        const auto h = hidden_size;
        require_shape(w_input.rows == 4 * h && w_hidden.rows == 4 * h && w_hidden.cols == h && bias.size() == 4 * h,
                      "LstmCellParams: inconsistent shapes for hidden size " + std::to_string(h));
    }

    void append_views(ParamViews& out) {
        out.emplace_back(w_input.data);
        out.emplace_back(w_hidden.data);
        out.emplace_back(bias);
    }

    friend bool operator==(const LstmCellParams&, const LstmCellParams&) = default;
};

struct CellState {
    Vector h;
    Vector c;
};

/// Single step of the standard LSTM recurrence.
inline CellState lstm_cell_forward(std::span<const double> x, std::span<const double> h, std::span<const double> c,
                                   const LstmCellParams& p) {
    const auto H = p.hidden_size;
    require_shape(x.size() == p.input_dim(), "lstm_cell_forward: input has " + std::to_string(x.size()) +
                                                 " values, expected " + std::to_string(p.input_dim()));
    require_shape(h.size() == H && c.size() == H, "lstm_cell_forward: state size does not match hidden size");
    Vector z(p.bias);
    gemv_acc(p.w_input, x, z);
    gemv_acc(p.w_hidden, h, z);
    CellState out{Vector(H), Vector(H)};
    for (std::size_t k = 0; k < H; ++k) {
        const double i = sigmoid(z[k]);
        const double f = sigmoid(z[H + k]);
        const double g = std::tanh(z[2 * H + k]);
        const double o = sigmoid(z[3 * H + k]);
        out.c[k] = f * c[k] + i * g;
        out.h[k] = o * std::tanh(out.c[k]);
    }
    return out;
}

/// Activations kept from a layer forward pass for backpropagation through time.
struct LstmCache {
    Tensor2 inputs;  // T x D
    Tensor2 h;       // (T+1) x H, row 0 is h0
    Tensor2 c;       // (T+1) x H, row 0 is c0
    Tensor2 gates;   // T x 4H post-activation [i f g o]
    Tensor2 tanh_c;  // T x H
};

inline Tensor2 lstm_layer_forward(const Tensor2& seq, const LstmCellParams& p, std::span<const double> h0,
                                  std::span<const double> c0, LstmCache* cache = nullptr) {
    const auto T = seq.rows;
    const auto H = p.hidden_size;
    if (T == 0) throw InputError("lstm_layer_forward: empty sequence");
    require_shape(seq.cols == p.input_dim(), "lstm_layer_forward: sequence has " + std::to_string(seq.cols) +
                                                 " columns, expected " + std::to_string(p.input_dim()));
    require_shape(h0.size() == H && c0.size() == H, "lstm_layer_forward: initial state size mismatch");

    LstmCache local;
    LstmCache& cc = cache ? *cache : local;
    cc.inputs = seq;
    cc.h = Tensor2(T + 1, H);
    cc.c = Tensor2(T + 1, H);
    cc.gates = Tensor2(T, 4 * H);
    cc.tanh_c = Tensor2(T, H);
    std::copy(h0.begin(), h0.end(), cc.h.row(0).begin());
    std::copy(c0.begin(), c0.end(), cc.c.row(0).begin());

    Tensor2 out(T, H);
    Vector z(4 * H);
    for (std::size_t t = 0; t < T; ++t) {
        std::copy(p.bias.begin(), p.bias.end(), z.begin());
        gemv_acc(p.w_input, seq.row(t), z);
        gemv_acc(p.w_hidden, cc.h.row(t), z);
        auto gr = cc.gates.row(t);
        auto cp = cc.c.row(t);
        auto cn = cc.c.row(t + 1);
        auto hn = cc.h.row(t + 1);
        auto th = cc.tanh_c.row(t);
        for (std::size_t k = 0; k < H; ++k) {
            const double i = sigmoid(z[k]);
            const double f = sigmoid(z[H + k]);
            const double g = std::tanh(z[2 * H + k]);
            const double o = sigmoid(z[3 * H + k]);
            gr[k] = i;
            gr[H + k] = f;
            gr[2 * H + k] = g;
            gr[3 * H + k] = o;
            cn[k] = f * cp[k] + i * g;
            th[k] = std::tanh(cn[k]);
            hn[k] = o * th[k];
        }
        std::copy(hn.begin(), hn.end(), out.row(t).begin());
    }
    return out;
}

inline Tensor2 lstm_layer_forward(const Tensor2& seq, const LstmCellParams& p, LstmCache* cache = nullptr) {
    const Vector zeros(p.hidden_size, 0.0);
    return lstm_layer_forward(seq, p, zeros, zeros, cache);
}

struct LstmBackward {
    Tensor2 d_inputs;  // T x D
    Vector d_h0;
    Vector d_c0;
};

/// Backpropagation through time. `d_out` is dLoss/dh_t for every step (T x H);
/// `d_h_last`/`d_c_last` optionally add gradient flowing into the final state.
/// Parameter gradients are accumulated into `grad`.
inline LstmBackward lstm_layer_backward(const LstmCache& cc, const LstmCellParams& p, const Tensor2& d_out,
                                        LstmCellParams& grad, std::span<const double> d_h_last = {},
                                        std::span<const double> d_c_last = {}) {
    const auto T = cc.gates.rows;
    const auto H = p.hidden_size;
    require_shape(d_out.rows == T && d_out.cols == H, "lstm_layer_backward: gradient shape mismatch");

    LstmBackward out{Tensor2(T, p.input_dim()), Vector(H, 0.0), Vector(H, 0.0)};
    Vector dh(H, 0.0), dc(H, 0.0), dz(4 * H);
    if (!d_h_last.empty()) std::copy(d_h_last.begin(), d_h_last.end(), dh.begin());
    if (!d_c_last.empty()) std::copy(d_c_last.begin(), d_c_last.end(), dc.begin());

    for (std::size_t t = T; t-- > 0;) {
        const auto gr = cc.gates.row(t);
        const auto th = cc.tanh_c.row(t);
        const auto cp = cc.c.row(t);
        const auto drow = d_out.row(t);
        for (std::size_t k = 0; k < H; ++k) {
            const double i = gr[k], f = gr[H + k], g = gr[2 * H + k], o = gr[3 * H + k];
            const double dht = dh[k] + drow[k];
            const double dct = dc[k] + dht * o * (1.0 - th[k] * th[k]);
            dz[k] = dct * g * i * (1.0 - i);
            dz[H + k] = dct * cp[k] * f * (1.0 - f);
            dz[2 * H + k] = dct * i * (1.0 - g * g);
            dz[3 * H + k] = dht * th[k] * o * (1.0 - o);
            dc[k] = dct * f;
        }
        outer_acc(dz, cc.inputs.row(t), grad.w_input);
        outer_acc(dz, cc.h.row(t), grad.w_hidden);
        for (std::size_t k = 0; k < 4 * H; ++k) grad.bias[k] += dz[k];
        gemv_t_acc(p.w_input, dz, out.d_inputs.row(t));
        std::fill(dh.begin(), dh.end(), 0.0);
        gemv_t_acc(p.w_hidden, dz, dh);
    }
    out.d_h0 = dh;
    out.d_c0 = dc;
    return out;
}

}  // namespace faultlab::nn
