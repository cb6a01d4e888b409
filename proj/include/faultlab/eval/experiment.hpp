#pragma once

#include <span>
#include <string>
#include <vector>

#include "faultlab/cascade.hpp"
#include "faultlab/eval/metrics.hpp"
#include "faultlab/log.hpp"
#include "faultlab/simgen.hpp"

namespace faultlab::eval {

struct Datasets {
    sim::TimeSeriesDataset normal;
    sim::TimeSeriesDataset anomaly;
    sim::TimeSeriesDataset mixed;
};

/// The three regimes, each from its own stage seed.
inline Datasets generate_datasets(sim::SimConfig base, std::uint64_t seed, bool full_scale = false) {
    auto make = [&](sim::Regime r, std::string_view name) {
        sim::SimConfig c = base;
        c.seed = stage_seed(seed, name);
        c.length = sim::default_length(r, full_scale);
        return sim::generate_dataset(r, c);
    };
    return {make(sim::Regime::normal_only, "data-normal"), make(sim::Regime::anomaly_only, "data-anomaly"),
            make(sim::Regime::mixed, "data-mixed")};
}

struct ExperimentConfig {
    cascade::CascadeConfig cascade;
    std::size_t folds = 10;
    std::uint64_t plan_seed = 7;
    std::size_t min_valid_folds = 8;
};

/// Epoch caps sized for a single core; everything else stays at the library defaults.
inline ExperimentConfig desk_scale_experiment(std::uint64_t seed) {
    ExperimentConfig e;
    auto& c = e.cascade;
    c.seed = seed;
    c.task2.max_epochs = 40;
    c.task2.batch_size = 8;
    c.task2.adam.alpha = 3e-3;
    c.task2.early.patience = 8;
    c.task3.max_epochs = 40;
    return e;
}

/// Shared pieces of an experiment: the backbone (trained on the normal and
/// anomaly-only regimes) and the change-point errors over the whole mixed series.
struct ExperimentContext {
    cascade::Backbone backbone;
    std::vector<double> errors;
};

inline ExperimentContext prepare_experiment(const Datasets& d, const ExperimentConfig& cfg) {
    ExperimentContext ctx{cascade::train_backbone(d.normal, d.anomaly, cfg.cascade), {}};
    ctx.errors = cpd::reconstruction_errors(ctx.backbone.cpd, feature_matrix(d.mixed));
    return ctx;
}

inline std::vector<int> class_labels(const sim::TimeSeriesDataset& ds) {
    std::vector<int> y(ds.size());
    for (std::size_t t = 0; t < ds.size(); ++t) y[t] = ds.records[t].fault_class;
    return y;
}

/// Trains `variant` on each fold's training block and scores per-step classes
/// on its test block. Failed folds are skipped with a warning.
inline EvalReport run_experiment(const Datasets& d, const ExperimentContext& ctx, cascade::Variant variant,
                                 const SeqCvPlan& plan, const ExperimentConfig& cfg) {
    const std::size_t w = ctx.backbone.cpd.window;
    require_shape(ctx.errors.size() + w - 1 == d.mixed.size(), "run_experiment: errors do not match the mixed series");
    EvalReport rep;
    rep.variant = std::string(cascade::to_string(variant));
    rep.pooled = ConfusionMatrix(cascade::kClasses);
    auto block_errors = [&](std::size_t start, std::size_t len) {
        return std::span<const double>(ctx.errors.data() + start, len >= w ? len - w + 1 : 0);
    };
    for (std::size_t k = 0; k < plan.folds.size(); ++k) {
        const auto& f = plan.folds[k];
        try {
            const auto train = sim::slice(d.mixed, f.train_start, f.train_len);
            const auto test = sim::slice(d.mixed, f.test_start, f.test_len);
            cascade::CascadeConfig c = cfg.cascade;
            c.seed = stage_seed(cfg.cascade.seed, "fold-" + std::to_string(k));
            const auto models = cascade::train_heads(ctx.backbone, train, variant, c, block_errors(f.train_start, f.train_len));
            const auto pred = cascade::smtcnn_infer(models, feature_matrix(test), block_errors(f.test_start, f.test_len));
            const auto cm = confusion(pred.classes, class_labels(test), cascade::kClasses);
            rep.folds.push_back(metrics(cm));
            rep.pooled += cm;
            log::info(rep.variant + " fold " + std::to_string(k + 1) + ": balanced accuracy " +
                      std::to_string(rep.folds.back().balanced_accuracy));
        } catch (const std::exception& e) {
            ++rep.skipped_folds;
            log::warn(rep.variant + " fold " + std::to_string(k + 1) + " skipped: " + e.what());
        }
    }
    if (rep.folds.size() < cfg.min_valid_folds)
        throw TrainingError("run_experiment: only " + std::to_string(rep.folds.size()) + " of " +
                            std::to_string(plan.folds.size()) + " folds succeeded for " + rep.variant);
    aggregate(rep);
    return rep;
}

inline std::vector<EvalReport> run_ablation(const Datasets& d, const ExperimentConfig& cfg,
                                            const std::vector<cascade::Variant>& variants) {
    const auto plan = seq_cv_plan(d.mixed.size(), cfg.folds, cfg.plan_seed);
    const auto ctx = prepare_experiment(d, cfg);
    std::vector<EvalReport> out;
    for (auto v : variants) out.push_back(run_experiment(d, ctx, v, plan, cfg));
    return out;
}

}  // namespace faultlab::eval
