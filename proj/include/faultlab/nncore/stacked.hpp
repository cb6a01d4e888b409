#pragma once

#include <vector>

#include "faultlab/nncore/dense.hpp"
#include "faultlab/nncore/loss.hpp"
#include "faultlab/nncore/lstm.hpp"

namespace faultlab::nn {

/// Two stacked LSTM layers followed by a per-step softmax head.
/// An optional per-step additive logit offset (T x C) can be supplied to shift
/// the head's pre-softmax scores; it is an input, not a parameter.
struct StackedLstmClassifier {
    LstmCellParams lower;
    LstmCellParams upper;
    DenseParams head;

    StackedLstmClassifier() = default;
    StackedLstmClassifier(std::size_t input_dim, std::size_t hidden, std::size_t classes)
        : lower(input_dim, hidden), upper(hidden, hidden), head(hidden, classes, Activation::softmax) {}

    void init(Rng& rng) {
        lower.init(rng);
        upper.init(rng);
        head.init(rng);
    }

    std::size_t input_dim() const noexcept { return lower.input_dim(); }
    std::size_t classes() const noexcept { return head.out_dim(); }

    ParamViews parameters() {
        ParamViews v;
        lower.append_views(v);
        upper.append_views(v);
        head.append_views(v);
        return v;
    }

    friend bool operator==(const StackedLstmClassifier&, const StackedLstmClassifier&) = default;
};

struct StackedCache {
    LstmCache lower;
    LstmCache upper;
    Tensor2 top;    // T x H
    Tensor2 probs;  // T x C
};

inline Tensor2 stacked_forward(const StackedLstmClassifier& m, const Tensor2& seq, const Tensor2* logit_offset = nullptr,
                               StackedCache* cache = nullptr) {
    StackedCache local;
    StackedCache& cc = cache ? *cache : local;
    const Tensor2 mid = lstm_layer_forward(seq, m.lower, &cc.lower);
    cc.top = lstm_layer_forward(mid, m.upper, &cc.upper);
    const auto T = seq.rows;
    const auto C = m.classes();
    if (logit_offset) require_shape(logit_offset->rows == T && logit_offset->cols == C, "stacked_forward: offset shape");
    cc.probs = Tensor2(T, C);
    for (std::size_t t = 0; t < T; ++t) {
        Vector z = dense_logits(cc.top.row(t), m.head);
        if (logit_offset)
            for (std::size_t c = 0; c < C; ++c) z[c] += (*logit_offset)(t, c);
        softmax_inplace(z);
        std::copy(z.begin(), z.end(), cc.probs.row(t).begin());
    }
    return cc.probs;
}

/// Backpropagates per-step logit gradients (T x C) into `grad`.
inline void stacked_backward(const StackedLstmClassifier& m, const StackedCache& cc, const Tensor2& d_logits,
                             StackedLstmClassifier& grad) {
    const auto T = cc.top.rows;
    Tensor2 d_top(T, m.upper.hidden_size);
    for (std::size_t t = 0; t < T; ++t) dense_backward_pre(cc.top.row(t), d_logits.row(t), m.head, grad.head, d_top.row(t));
    const LstmBackward up = lstm_layer_backward(cc.upper, m.upper, d_top, grad.upper);
    lstm_layer_backward(cc.lower, m.lower, up.d_inputs, grad.lower);
}

/// Per-step cross-entropy gradient at the logits for one sequence.
inline Tensor2 cross_entropy_logit_grads(const Tensor2& probs, const std::vector<int>& labels, double n_samples) {
    Tensor2 d(probs.rows, probs.cols);
    for (std::size_t t = 0; t < probs.rows; ++t) cross_entropy_logit_grad(probs.row(t), labels[t], n_samples, d.row(t));
    return d;
}

}  // namespace faultlab::nn
