#pragma once

#include <cmath>
#include <vector>

#include "faultlab/nncore/tensor.hpp"

namespace faultlab::nn {

/// Probabilities below this are clamped before taking the log.
inline constexpr double kLogClamp = 1e-12;

struct LossAndGrad {
    double loss = 0.0;
    Tensor2 grad;
};

/// Mean squared error over every element; gradient is 2(pred - target)/n.
inline LossAndGrad mse_loss(const Tensor2& pred, const Tensor2& target) {
    require_shape(pred.rows == target.rows && pred.cols == target.cols,
                  "mse_loss: shape " + shape_str(pred) + " vs " + shape_str(target));
    require(!pred.empty(), "mse_loss: empty tensors");
    LossAndGrad out{0.0, Tensor2(pred.rows, pred.cols)};
    const double n = static_cast<double>(pred.size());
    for (std::size_t k = 0; k < pred.size(); ++k) {
        const double d = pred.data[k] - target.data[k];
        out.loss += d * d;
        out.grad.data[k] = 2.0 * d / n;
    }
    out.loss /= n;
    return out;
}

/// Per-step categorical cross-entropy summed over time and classes and divided
/// by the number of sequences only, so the value grows with sequence length.
///
/// `probs[i]` is a T_i x C matrix of distributions for sequence i and
/// `labels[i][t]` is the 1-based true class. Sequences may be ragged.
inline double sequence_cross_entropy(const std::vector<Tensor2>& probs, const std::vector<std::vector<int>>& labels) {
    require_shape(probs.size() == labels.size(), "sequence_cross_entropy: probs/labels sample count mismatch");
    require(!probs.empty(), "sequence_cross_entropy: no samples");
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const auto& p = probs[i];
        require_shape(p.rows == labels[i].size(), "sequence_cross_entropy: length mismatch in sample " + std::to_string(i));
        for (std::size_t t = 0; t < p.rows; ++t) {
            const int y = labels[i][t];
            if (y < 1 || static_cast<std::size_t>(y) > p.cols)
                throw InputError("sequence_cross_entropy: label " + std::to_string(y) + " outside 1.." +
                                 std::to_string(p.cols));
            total -= std::log(std::max(p(t, static_cast<std::size_t>(y - 1)), kLogClamp));
        }
    }
    return total / static_cast<double>(probs.size());
}

/// Gradient of sequence_cross_entropy with respect to the softmax logits of
/// one step: (p - onehot)/N, or zero when the true-class probability sits
/// under the clamp.
inline void cross_entropy_logit_grad(std::span<const double> p, int label, double n_samples, std::span<double> dz) {
    const auto y = static_cast<std::size_t>(label - 1);
    if (p[y] < kLogClamp) {
        std::fill(dz.begin(), dz.end(), 0.0);
        return;
    }
    for (std::size_t c = 0; c < p.size(); ++c) dz[c] = (p[c] - (c == y ? 1.0 : 0.0)) / n_samples;
}

}  // namespace faultlab::nn
