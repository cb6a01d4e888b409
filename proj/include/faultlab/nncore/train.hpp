#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "faultlab/nncore/adam.hpp"

namespace faultlab::nn {

struct EarlyStopConfig {
    std::size_t patience = 10;
    double min_delta = 0.0;
    bool restore_best = true;
};

struct TrainConfig {
    std::size_t max_epochs = 200;
    std::size_t batch_size = 16;
    AdamConfig adam;
    bool early_stopping = true;
    EarlyStopConfig early;
    std::uint64_t seed = 0;
};

/// Epochs are 1-based in every field.
struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::size_t best_epoch = 0;
    std::size_t epochs_run = 0;
    bool stopped_early = false;
};

template <class M>
concept TrainableModel = std::copyable<M> && requires(M m) {
    { m.parameters() } -> std::same_as<ParamViews>;
};

/// Source of training batches and validation loss for `train`.
template <class O, class M>
concept Objective = requires(O o, const M& model, M& grad, std::span<const std::size_t> idx) {
    { o.num_train() } -> std::convertible_to<std::size_t>;
    { o.batch_loss(model, idx, grad) } -> std::convertible_to<double>;
    { o.has_validation() } -> std::convertible_to<bool>;
    { o.validation_loss(model) } -> std::convertible_to<double>;
};

template <TrainableModel M>
M zeros_like(const M& model) {
    M g = model;
    zero(g.parameters());
    return g;
}

/// Mini-batch Adam with optional early stopping on validation loss.
/// Batch order is reshuffled each epoch from `cfg.seed`; the run is bitwise
/// reproducible for a fixed seed.
template <TrainableModel M, Objective<M> O>
TrainHistory train(M& model, O& objective, const TrainConfig& cfg) {
    const std::size_t n = objective.num_train();
    if (n == 0) throw TrainingError("train: no training samples");
    const bool early = cfg.early_stopping && objective.has_validation();
    if (cfg.early_stopping && !objective.has_validation())
        throw InputError("train: early stopping requested without validation data");
    require(cfg.early.patience >= 1 && cfg.early.min_delta >= 0.0, "train: invalid early-stopping config");

    Rng rng(cfg.seed);
    M grad = zeros_like(model);
    AdamState opt(cfg.adam, total_size(model.parameters()));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t bs = cfg.batch_size == 0 ? n : cfg.batch_size;

    TrainHistory hist;
    double best = std::numeric_limits<double>::infinity();
    std::optional<M> best_model;
    std::size_t wait = 0;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += bs) {
            const std::size_t len = std::min(bs, n - start);
            zero(grad.parameters());
            const double l = objective.batch_loss(model, std::span<const std::size_t>(order.data() + start, len), grad);
            if (!std::isfinite(l))
                throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(batches + 1));
            adam_step(model.parameters(), grad.parameters(), opt);
            epoch_loss += l;
            ++batches;
        }
        hist.train_loss.push_back(epoch_loss / static_cast<double>(batches));
        hist.epochs_run = epoch;

        if (!early) {
            hist.best_epoch = epoch;
            continue;
        }
        const double vl = objective.validation_loss(model);
        if (!std::isfinite(vl))
            throw TrainingError("train: non-finite validation loss at epoch " + std::to_string(epoch));
        hist.val_loss.push_back(vl);
        if (vl < best - cfg.early.min_delta) {
            best = vl;
            hist.best_epoch = epoch;
            wait = 0;
            if (cfg.early.restore_best) best_model = model;
        } else if (++wait >= cfg.early.patience) {
            hist.stopped_early = true;
            break;
        }
    }
    if (early && cfg.early.restore_best && best_model) model = std::move(*best_model);
    return hist;
}

}  // namespace faultlab::nn
