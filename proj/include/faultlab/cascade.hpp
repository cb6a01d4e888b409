#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "faultlab/changepoint.hpp"
#include "faultlab/log.hpp"
#include "faultlab/nncore.hpp"
#include "faultlab/segclass.hpp"

namespace faultlab::cascade {

using cpd::Segment;
using nn::StackedLstmClassifier;
using nn::Tensor2;

inline constexpr std::size_t kTask3Inputs = kNumChannels + 2;  // X, O_t1, O_t2
inline constexpr std::size_t kClasses = sim::kNumClasses;
inline constexpr int kAnomalyLabel = 1;  // Task 2 head: 1 anomaly, 2 normal
inline constexpr int kNormalLabel = 2;

enum class Variant { full, b2_no_cpd, b3_no_segclass };

inline std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::full: return "full";
        case Variant::b2_no_cpd: return "b2";
        case Variant::b3_no_segclass: return "b3";
    }
    return "full";
}

inline Variant variant_from_string(std::string_view s) {
    if (s == "full") return Variant::full;
    if (s == "b2" || s == "b2_no_cpd") return Variant::b2_no_cpd;
    if (s == "b3" || s == "b3_no_segclass") return Variant::b3_no_segclass;
    throw InputError("unknown variant '" + std::string(s) + "' (expected full, b2 or b3)");
}

struct SegmentationParams {
    std::size_t min_gap = 16;
    std::size_t min_len = 4;
};

inline nn::TrainConfig default_head_training() {
    return {.max_epochs = 200, .batch_size = 16, .adam = {}, .early_stopping = true, .early = {.patience = 10}};
}

struct CascadeConfig {
    SegmentationParams segmentation;
    std::size_t hidden = 32;
    std::size_t chunk_len = 64;  // sequences are cut into chunks this long, from zero state
    double val_fraction = 0.15;  // trailing chunks held out for early stopping
    nn::TrainConfig task2 = default_head_training();
    nn::TrainConfig task3 = default_head_training();
    bool task2_full_series = false;  // score Task 2 everywhere instead of inside segments only
    bool segclass_prior = true;
    double prior_floor = 1e-4;
    double prior_segment_weight = 0.5;  // lambda: prior mass given to faults inside a segment before Task 2
    cpd::AutoencoderConfig cpd;
    seg::ClassifierKind seg_kind = seg::ClassifierKind::random_forest;
    std::size_t seg_window = 16;
    std::size_t seg_stride = 8;
    seg::ClassifierConfig seg;
    std::uint64_t seed = 0;
};

/// Applies the ablation switches of a variant to a config.
inline CascadeConfig config_for(Variant v, CascadeConfig cfg) {
    if (v == Variant::b2_no_cpd) cfg.task2_full_series = true;
    if (v == Variant::b3_no_segclass) cfg.segclass_prior = false;
    return cfg;
}

struct CascadeInputs {
    Tensor2 x;  // T x 3, standardized
    std::vector<double> o_t1;
    std::vector<double> o_t2;

    void validate() const {
        require_shape(x.cols == kNumChannels, "CascadeInputs: X must have 3 columns");
        require_shape(o_t1.size() == x.rows && o_t2.size() == x.rows,
                      "CascadeInputs: X has " + std::to_string(x.rows) + " rows but O_t1/O_t2 have " +
                          std::to_string(o_t1.size()) + "/" + std::to_string(o_t2.size()));
        for (std::size_t t = 0; t < x.rows; ++t) {
            if (o_t1[t] != 0.0 && o_t1[t] != 1.0) throw InputError("CascadeInputs: O_t1 must be binary");
            if (!(o_t2[t] >= 0.0 && o_t2[t] <= 1.0)) throw InputError("CascadeInputs: O_t2 must lie in [0,1]");
        }
    }
};

struct CascadePrediction {
    std::vector<int> classes;
    std::vector<bool> anomaly;
    Tensor2 probs;  // T x 12
    std::vector<Segment> segments;
    std::vector<double> o_t1;
    std::vector<double> o_t2;

    double p_anomaly(std::size_t t) const { return 1.0 - probs(t, kClasses - 1); }
};

// ---- Task 1 -------------------------------------------------------------

struct Task1Result {
    std::vector<Segment> segments;
    std::vector<double> mask;
};

/// Segments from precomputed window errors of a series of length n.
inline Task1Result task1_from_errors(std::span<const double> errors, std::size_t n, const cpd::AutoencoderModel& m,
                                     const SegmentationParams& sp) {
    require_shape(errors.size() + m.window == n + 1 || (errors.empty() && n < m.window),
                  "task1: " + std::to_string(errors.size()) + " window errors do not fit a series of length " +
                      std::to_string(n));
    Task1Result r;
    const auto flags = cpd::detect_changepoints(errors, m.threshold);
    r.segments = cpd::flags_to_segments(flags, sp.min_gap, sp.min_len, m.window);
    r.mask = cpd::segments_to_mask(r.segments, n);
    return r;
}

inline Task1Result task1_propose(const Tensor2& raw, const cpd::AutoencoderModel& m, const SegmentationParams& sp) {
    const auto errors = cpd::reconstruction_errors(m, raw);
    return task1_from_errors(errors, raw.rows, m, sp);
}

// ---- shared sequence objective -----------------------------------------

/// Cuts each region into consecutive pieces of at most `len` steps.
inline std::vector<Segment> chunk_regions(const std::vector<Segment>& regions, std::size_t len) {
    require(len >= 1, "chunk_regions: chunk length must be >= 1");
    std::vector<Segment> out;
    for (const auto& r : regions)
        for (std::size_t s = r.start; s < r.end; s += len) out.push_back({s, std::min(r.end, s + len)});
    return out;
}

inline Tensor2 rows_of(const Tensor2& x, const Segment& s) {
    Tensor2 out(s.end - s.start, x.cols);
    std::copy(x.data.begin() + static_cast<long>(s.start * x.cols), x.data.begin() + static_cast<long>(s.end * x.cols),
              out.data.begin());
    return out;
}

namespace detail {

/// Per-step cross-entropy over chunked sequences; the loss of a batch is the
/// Summed per-step cross-entropy divided by the number of sequences in it.
struct SequenceObjective {
    const Tensor2& inputs;
    const std::vector<int>& labels;
    const Tensor2* offset = nullptr;  // optional T x C logit offset
    std::vector<Segment> train_chunks;
    std::vector<Segment> val_chunks;

    std::size_t num_train() const { return train_chunks.size(); }
    bool has_validation() const { return !val_chunks.empty(); }

    std::vector<int> labels_of(const Segment& s) const {
        return {labels.begin() + static_cast<long>(s.start), labels.begin() + static_cast<long>(s.end)};
    }

    Tensor2 forward(const StackedLstmClassifier& m, const Segment& s, nn::StackedCache* cache) const {
        const Tensor2 seq = rows_of(inputs, s);
        if (!offset) return nn::stacked_forward(m, seq, nullptr, cache);
        const Tensor2 off = rows_of(*offset, s);
        return nn::stacked_forward(m, seq, &off, cache);
    }

    double batch_loss(const StackedLstmClassifier& m, std::span<const std::size_t> idx, StackedLstmClassifier& g) const {
        std::vector<Tensor2> probs;
        std::vector<std::vector<int>> ys;
        const double n = static_cast<double>(idx.size());
        for (auto k : idx) {
            nn::StackedCache cache;
            probs.push_back(forward(m, train_chunks[k], &cache));
            ys.push_back(labels_of(train_chunks[k]));
            nn::stacked_backward(m, cache, nn::cross_entropy_logit_grads(probs.back(), ys.back(), n), g);
        }
        return nn::sequence_cross_entropy(probs, ys);
    }

    double validation_loss(const StackedLstmClassifier& m) const {
        std::vector<Tensor2> probs;
        std::vector<std::vector<int>> ys;
        for (const auto& s : val_chunks) {
            probs.push_back(forward(m, s, nullptr));
            ys.push_back(labels_of(s));
        }
        return nn::sequence_cross_entropy(probs, ys);
    }
};

inline detail::SequenceObjective make_objective(const Tensor2& inputs, const std::vector<int>& labels, const Tensor2* offset,
                                                std::vector<Segment> chunks, double val_fraction) {
    // the most recent chunks are held out, as the evaluation block also lies later in time
    const auto n_val = static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(chunks.size())));
    SequenceObjective obj{inputs, labels, offset, {}, {}};
    obj.train_chunks.assign(chunks.begin(), chunks.end() - static_cast<long>(n_val));
    obj.val_chunks.assign(chunks.end() - static_cast<long>(n_val), chunks.end());
    return obj;
}

inline nn::TrainHistory fit(StackedLstmClassifier& m, SequenceObjective& obj, nn::TrainConfig tc, std::string_view name) {
    if (obj.train_chunks.empty()) {
        obj.train_chunks = obj.val_chunks;
        obj.val_chunks.clear();
    }
    if (!obj.has_validation()) tc.early_stopping = false;
    // the warm start competes as epoch 0
    const StackedLstmClassifier start = m;
    const double start_val = tc.early_stopping ? obj.validation_loss(m) : 0.0;
    auto h = nn::train(m, obj, tc);
    if (tc.early_stopping && !h.val_loss.empty() && start_val <= *std::min_element(h.val_loss.begin(), h.val_loss.end())) {
        m = start;
        h.best_epoch = 0;
    }
    log::info(std::string(name) + ": " + std::to_string(obj.train_chunks.size()) + " train / " +
              std::to_string(obj.val_chunks.size()) + " val chunks, " + std::to_string(h.epochs_run) + " epochs, best " +
              std::to_string(h.best_epoch) +
              (h.train_loss.empty() ? std::string() : ", train loss " + std::to_string(h.train_loss.back())) +
              (h.val_loss.empty() ? std::string() : ", best val " + std::to_string(*std::min_element(h.val_loss.begin(), h.val_loss.end()))));
    return h;
}

}  // namespace detail

struct HeadFit {
    StackedLstmClassifier model;
    nn::TrainHistory history;
};

// ---- Task 2 -------------------------------------------------------------

inline std::vector<int> anomaly_labels(const sim::TimeSeriesDataset& ds) {
    std::vector<int> y(ds.size());
    for (std::size_t t = 0; t < ds.size(); ++t) y[t] = ds.records[t].anomaly ? kAnomalyLabel : kNormalLabel;
    return y;
}

/// Fits the anomaly/normal refinement network on the steps inside `regions`.
inline HeadFit train_task2(const Tensor2& x, const std::vector<int>& labels, const std::vector<Segment>& regions,
                           const CascadeConfig& cfg) {
    require_shape(x.cols == kNumChannels && labels.size() == x.rows, "train_task2: inputs and labels are misaligned");
    auto chunks = chunk_regions(regions, cfg.chunk_len);
    if (chunks.empty()) throw TrainingError("train_task2: no proposed segments to train on");
    HeadFit f{StackedLstmClassifier(kNumChannels, cfg.hidden, 2), {}};
    Rng rng(stage_seed(cfg.seed, "task2-init"));
    f.model.init(rng);
    auto obj = detail::make_objective(x, labels, nullptr, std::move(chunks), cfg.val_fraction);
    nn::TrainConfig tc = cfg.task2;
    tc.seed = stage_seed(cfg.seed, "task2-batches");
    f.history = detail::fit(f.model, obj, tc, "task2");
    return f;
}

/// Anomaly probability per step inside `regions`, 0 elsewhere.
inline std::vector<double> task2_score(const StackedLstmClassifier& m, const Tensor2& x, const std::vector<Segment>& regions,
                                       std::size_t chunk_len) {
    require(m.classes() == 2, "task2_score: model is not a 2-way Task 2 network");
    require_shape(x.cols == m.input_dim(), "task2_score: input has " + std::to_string(x.cols) + " columns, model expects " +
                                               std::to_string(m.input_dim()));
    std::vector<double> o(x.rows, 0.0);
    for (const auto& c : chunk_regions(regions, chunk_len)) {
        const auto p = nn::stacked_forward(m, rows_of(x, c));
        for (std::size_t t = 0; t < p.rows; ++t) o[c.start + t] = p(t, 0);
    }
    return o;
}

// ---- Task 3 -------------------------------------------------------------

inline Tensor2 build_task3_inputs(const CascadeInputs& in) {
    in.validate();
    Tensor2 z(in.x.rows, kTask3Inputs);
    for (std::size_t t = 0; t < in.x.rows; ++t) {
        for (std::size_t c = 0; c < kNumChannels; ++c) z(t, c) = in.x(t, c);
        z(t, kNumChannels) = in.o_t1[t];
        z(t, kNumChannels + 1) = in.o_t2[t];
    }
    return z;
}

/// Per-step fault-class distribution from the window classifier: each step
/// averages the label probabilities of every window (stride 1) covering it.
/// Column 12 (no fault) stays zero.
inline Tensor2 segclass_step_probs(const seg::ClassifierModel& m, const Tensor2& raw, std::size_t window) {
    require(raw.rows >= 1, "segclass_step_probs: empty series");
    const std::size_t w = std::min(window, raw.rows);
    Tensor2 acc(raw.rows, kClasses);
    std::vector<double> count(raw.rows, 0.0);
    for (std::size_t s = 0; s + w <= raw.rows; ++s) {
        const auto p = seg::label_probabilities(m, seg::window_stats(raw, s, w), kClasses);
        for (std::size_t t = s; t < s + w; ++t) {
            for (std::size_t c = 0; c < kClasses; ++c) acc(t, c) += p[c];
            count[t] += 1.0;
        }
    }
    for (std::size_t t = 0; t < raw.rows; ++t)
        for (std::size_t c = 0; c < kClasses; ++c) acc(t, c) /= count[t];
    return acc;
}

/// Log-prior added to Task 3's logits. Inside proposed segments the fault
/// classes share the gate g = O_t1 * (lambda + (1 - lambda) * O_t2) in
/// proportion to the window classifier; no-fault gets 1 - g.
inline Tensor2 prior_offset(const Tensor2& seg_probs, std::span<const double> o_t1, std::span<const double> o_t2,
                            double lambda, double floor) {
    require_shape(seg_probs.rows == o_t2.size() && o_t1.size() == o_t2.size() && seg_probs.cols == kClasses,
                  "prior_offset: shape mismatch");
    require(floor > 0.0 && floor < 1.0, "prior_offset: floor must lie in (0,1)");
    require(lambda >= 0.0 && lambda <= 1.0, "prior_offset: lambda must lie in [0,1]");
    Tensor2 off(seg_probs.rows, kClasses);
    for (std::size_t t = 0; t < off.rows; ++t) {
        const double g = o_t1[t] * (lambda + (1.0 - lambda) * o_t2[t]);
        for (std::size_t c = 0; c + 1 < kClasses; ++c) off(t, c) = std::log(std::max(g * seg_probs(t, c), floor));
        off(t, kClasses - 1) = std::log(std::max(1.0 - g, floor));
    }
    return off;
}

inline HeadFit train_task3(const Tensor2& inputs, const std::vector<int>& labels, const Tensor2* offset,
                           const CascadeConfig& cfg) {
    require_shape(inputs.cols == kTask3Inputs, "train_task3: inputs must have 5 columns (X, O_t1, O_t2)");
    if (labels.size() != inputs.rows)
        throw ShapeError("train_task3: " + std::to_string(inputs.rows) + " input steps but " + std::to_string(labels.size()) +
                         " labels");
    if (offset) require_shape(offset->rows == inputs.rows && offset->cols == kClasses, "train_task3: offset shape mismatch");
    HeadFit f{StackedLstmClassifier(kTask3Inputs, cfg.hidden, kClasses), {}};
    Rng rng(stage_seed(cfg.seed, "task3-init"));
    f.model.init(rng);
    // zero head: before any update the output distribution is exactly the prior
    std::fill(f.model.head.w.data.begin(), f.model.head.w.data.end(), 0.0);
    std::fill(f.model.head.b.begin(), f.model.head.b.end(), 0.0);
    auto chunks = chunk_regions({{0, inputs.rows}}, cfg.chunk_len);
    auto obj = detail::make_objective(inputs, labels, offset, std::move(chunks), cfg.val_fraction);
    nn::TrainConfig tc = cfg.task3;
    tc.seed = stage_seed(cfg.seed, "task3-batches");
    f.history = detail::fit(f.model, obj, tc, "task3");
    return f;
}

/// Argmax with ties resolved toward class 12, then toward the lower id.
inline int argmax_class(std::span<const double> p) {
    std::size_t best = kClasses - 1;
    for (std::size_t c = 0; c + 1 < kClasses; ++c)
        if (p[c] > p[best]) best = c;
    return static_cast<int>(best) + 1;
}

inline Tensor2 task3_forward(const StackedLstmClassifier& m, const Tensor2& inputs, const Tensor2* offset,
                             std::size_t chunk_len) {
    require(m.classes() == kClasses, "task3_forward: model is not a 12-way Task 3 network");
    require_shape(inputs.cols == m.input_dim(), "task3_forward: input width mismatch");
    Tensor2 probs(inputs.rows, kClasses);
    for (const auto& c : chunk_regions({{0, inputs.rows}}, chunk_len)) {
        Tensor2 p;
        if (offset) {
            const Tensor2 off = rows_of(*offset, c);
            p = nn::stacked_forward(m, rows_of(inputs, c), &off);
        } else {
            p = nn::stacked_forward(m, rows_of(inputs, c));
        }
        std::copy(p.data.begin(), p.data.end(), probs.data.begin() + static_cast<long>(c.start * kClasses));
    }
    return probs;
}

// ---- pipeline -----------------------------------------------------------

struct SmtcnnModels {
    Variant variant = Variant::full;
    CascadeConfig config;
    ChannelScaler scaler;                       // fitted on normal data
    std::optional<cpd::AutoencoderModel> cpd;   // absent for b2
    std::optional<seg::ClassifierModel> seg;    // absent for b3
    std::optional<StackedLstmClassifier> task2;
    std::optional<StackedLstmClassifier> task3;
};

/// Stages trained on the normal and anomaly-only regimes. They never see the
/// mixed series, so one backbone serves every fold of an experiment.
struct Backbone {
    cpd::AutoencoderModel cpd;
    nn::TrainHistory cpd_history;
    seg::ClassifierModel seg;
};

inline Backbone train_backbone(const sim::TimeSeriesDataset& normal, const sim::TimeSeriesDataset& anomaly,
                               const CascadeConfig& cfg) {
    if (anomaly.regime != sim::Regime::anomaly_only)
        throw InputError("smtcnn: expected an anomaly-only dataset for the classifier stage, got " +
                         std::string(sim::to_string(anomaly.regime)));
    auto ae_cfg = cfg.cpd;
    ae_cfg.train.seed = stage_seed(cfg.seed, "cpd");
    auto fit = cpd::train_autoencoder(normal, ae_cfg);
    seg::ClassifierConfig sc = cfg.seg;
    sc.seed = stage_seed(cfg.seed, "segclass");
    auto clf = seg::train_classifier(cfg.seg_kind, seg::windowize(anomaly, cfg.seg_window, cfg.seg_stride), sc);
    return {std::move(fit.model), std::move(fit.history), std::move(clf)};
}

namespace detail {

struct FrontEnd {
    Tensor2 x;
    Task1Result t1;
    std::vector<Segment> task2_regions;
    std::optional<Tensor2> seg_probs;
};

inline FrontEnd front_end(const SmtcnnModels& m, const Tensor2& raw, std::optional<std::span<const double>> errors) {
    FrontEnd fe;
    fe.x = m.scaler.apply(raw);
    if (m.variant == Variant::b2_no_cpd) {
        fe.t1.mask.assign(raw.rows, 1.0);
        fe.t1.segments = {{0, raw.rows}};
    } else {
        if (!m.cpd) throw InputError("smtcnn: change-point model is missing");
        fe.t1 = errors ? task1_from_errors(*errors, raw.rows, *m.cpd, m.config.segmentation)
                       : task1_propose(raw, *m.cpd, m.config.segmentation);
    }
    fe.task2_regions = m.config.task2_full_series ? std::vector<Segment>{{0, raw.rows}} : fe.t1.segments;
    if (m.config.segclass_prior) {
        if (!m.seg) throw InputError("smtcnn: segment classifier is missing");
        fe.seg_probs = segclass_step_probs(*m.seg, raw, m.config.seg_window);
    }
    return fe;
}

}  // namespace detail

/// Trains Tasks 2 and 3 on a labelled mixed series on top of a backbone.
/// `errors` optionally supplies precomputed change-point window errors for
/// `mixed`, which must equal reconstruction_errors(backbone.cpd, mixed).
inline SmtcnnModels train_heads(const Backbone& bb, const sim::TimeSeriesDataset& mixed, Variant variant,
                                const CascadeConfig& base, std::optional<std::span<const double>> errors = std::nullopt) {
    if (mixed.regime != sim::Regime::mixed)
        throw InputError("smtcnn: expected a mixed dataset for Tasks 2/3, got " + std::string(sim::to_string(mixed.regime)));
    SmtcnnModels m;
    m.variant = variant;
    m.config = config_for(variant, base);
    m.scaler = bb.cpd.scaler;
    if (variant != Variant::b2_no_cpd) m.cpd = bb.cpd;
    if (m.config.segclass_prior) m.seg = bb.seg;

    const auto raw = feature_matrix(mixed);
    auto fe = detail::front_end(m, raw, errors);
    const auto y2 = anomaly_labels(mixed);
    m.task2 = train_task2(fe.x, y2, fe.task2_regions, m.config).model;
    const auto o2 = task2_score(*m.task2, fe.x, fe.task2_regions, m.config.chunk_len);

    const auto inputs = build_task3_inputs({fe.x, fe.t1.mask, o2});
    std::vector<int> y3(mixed.size());
    for (std::size_t t = 0; t < mixed.size(); ++t) y3[t] = mixed.records[t].fault_class;
    std::optional<Tensor2> offset;
    if (fe.seg_probs) offset = prior_offset(*fe.seg_probs, fe.t1.mask, o2, m.config.prior_segment_weight, m.config.prior_floor);
    m.task3 = train_task3(inputs, y3, offset ? &*offset : nullptr, m.config).model;
    return m;
}

inline SmtcnnModels smtcnn_train_full(const sim::TimeSeriesDataset& mixed, const sim::TimeSeriesDataset& normal,
                                      const sim::TimeSeriesDataset& anomaly, const CascadeConfig& cfg,
                                      Variant variant = Variant::full) {
    if (mixed.regime != sim::Regime::mixed)
        throw InputError("smtcnn: expected a mixed dataset, got " + std::string(sim::to_string(mixed.regime)));
    return train_heads(train_backbone(normal, anomaly, cfg), mixed, variant, cfg);
}

inline CascadePrediction smtcnn_infer(const SmtcnnModels& m, const Tensor2& raw,
                                      std::optional<std::span<const double>> errors = std::nullopt) {
    if (!m.task2) throw InputError("smtcnn: Task 2 model is missing");
    if (!m.task3) throw InputError("smtcnn: Task 3 model is missing");
    require_shape(raw.cols == kNumChannels, "smtcnn_infer: series must have 3 channels");
    auto fe = detail::front_end(m, raw, errors);
    CascadePrediction out;
    out.o_t2 = task2_score(*m.task2, fe.x, fe.task2_regions, m.config.chunk_len);
    const auto inputs = build_task3_inputs({fe.x, fe.t1.mask, out.o_t2});
    std::optional<Tensor2> offset;
    if (fe.seg_probs) offset = prior_offset(*fe.seg_probs, fe.t1.mask, out.o_t2, m.config.prior_segment_weight, m.config.prior_floor);
    out.probs = task3_forward(*m.task3, inputs, offset ? &*offset : nullptr, m.config.chunk_len);
    out.classes.resize(raw.rows);
    out.anomaly.resize(raw.rows);
    for (std::size_t t = 0; t < raw.rows; ++t) {
        out.classes[t] = argmax_class(out.probs.row(t));
        out.anomaly[t] = out.classes[t] != sim::kNoFault;
    }
    out.segments = std::move(fe.t1.segments);
    out.o_t1 = std::move(fe.t1.mask);
    return out;
}

inline CascadePrediction smtcnn_infer(const SmtcnnModels& m, const sim::TimeSeriesDataset& ds) {
    return smtcnn_infer(m, feature_matrix(ds));
}

// ---- persistence ----------------------------------------------------------

inline nlohmann::json head_checkpoint(const StackedLstmClassifier& m, const std::string& kind, const nn::AdamConfig& adam) {
    auto j = nn::make_checkpoint(kind);
    j["layers"].push_back(nn::layer_json("lstm_lower", m.lower));
    j["layers"].push_back(nn::layer_json("lstm_upper", m.upper));
    j["layers"].push_back(nn::layer_json("head", m.head));
    j["optimizer"] = nn::optimizer_json(adam);
    j["meta"] = {{"input_dim", m.input_dim()}, {"hidden", m.lower.hidden_size}, {"classes", m.classes()}};
    return j;
}

inline StackedLstmClassifier head_from_checkpoint(const nlohmann::json& j, const std::string& kind,
                                                  std::size_t expected_classes) {
    nn::check_header(j, kind);
    StackedLstmClassifier m;
    const auto& layers = j.at("layers");
    if (!layers.is_array() || layers.size() != 3) throw ParseError(kind + " checkpoint: expected 3 layers");
    m.lower = nn::lstm_from_json(layers[0], "lstm_lower");
    m.upper = nn::lstm_from_json(layers[1], "lstm_upper");
    m.head = nn::dense_from_json(layers[2], "head");
    if (m.upper.input_dim() != m.lower.hidden_size || m.head.in_dim() != m.upper.hidden_size ||
        m.classes() != expected_classes)
        throw ParseError(kind + " checkpoint: layer shapes do not chain");
    return m;
}

inline constexpr const char* kManifestFile = "pipeline.json";
inline constexpr const char* kCpdFile = "cpd.model";
inline constexpr const char* kSegFile = "seg.model";
inline constexpr const char* kTask2File = "task2.model";
inline constexpr const char* kTask3File = "task3.model";

inline void save_models(const SmtcnnModels& m, const std::filesystem::path& dir) {
    if (!m.task2 || !m.task3) throw InputError("save_models: Tasks 2/3 are not trained");
    std::filesystem::create_directories(dir);
    const auto& c = m.config;
    nlohmann::json manifest{{"format", "faultlab-pipeline"},
                            {"version", 1},
                            {"variant", std::string(to_string(m.variant))},
                            {"scaler", m.scaler.to_json()},
                            {"chunk_len", c.chunk_len},
                            {"segmentation", {{"min_gap", c.segmentation.min_gap}, {"min_len", c.segmentation.min_len}}},
                            {"task2_full_series", c.task2_full_series},
                            {"segclass_prior", c.segclass_prior},
                            {"prior_floor", c.prior_floor},
                            {"prior_segment_weight", c.prior_segment_weight},
                            {"seg_window", c.seg_window},
                            {"stages", nlohmann::json::array()}};
    if (m.cpd) {
        nn::write_text_file(dir / kCpdFile, nn::dump_checkpoint(cpd::to_checkpoint(*m.cpd, c.cpd.train.adam)));
        manifest["stages"].push_back(kCpdFile);
    }
    if (m.seg) {
        nn::write_text_file(dir / kSegFile, nn::dump_checkpoint(seg::to_checkpoint(*m.seg, c.seg_window, c.seg_stride)));
        manifest["stages"].push_back(kSegFile);
    }
    nn::write_text_file(dir / kTask2File, nn::dump_checkpoint(head_checkpoint(*m.task2, "smtcnn-task2", c.task2.adam)));
    nn::write_text_file(dir / kTask3File, nn::dump_checkpoint(head_checkpoint(*m.task3, "smtcnn-task3", c.task3.adam)));
    manifest["stages"].push_back(kTask2File);
    manifest["stages"].push_back(kTask3File);
    nn::write_text_file(dir / kManifestFile, manifest.dump(1) + "\n");
}

inline SmtcnnModels load_models(const std::filesystem::path& dir) {
    const auto need = [&](const char* name) {
        const auto p = dir / name;
        if (!std::filesystem::exists(p)) throw InputError("model directory is missing " + p.string());
        return p;
    };
    const auto manifest = nlohmann::json::parse(nn::read_text_file(need(kManifestFile)));
    if (manifest.value("format", "") != "faultlab-pipeline") throw ParseError(need(kManifestFile).string() + ": not a pipeline manifest");
    SmtcnnModels m;
    m.variant = variant_from_string(manifest.at("variant").get<std::string>());
    m.scaler = ChannelScaler::from_json(manifest.at("scaler"));
    auto& c = m.config;
    c.chunk_len = manifest.at("chunk_len").get<std::size_t>();
    c.segmentation.min_gap = manifest.at("segmentation").at("min_gap").get<std::size_t>();
    c.segmentation.min_len = manifest.at("segmentation").at("min_len").get<std::size_t>();
    c.task2_full_series = manifest.at("task2_full_series").get<bool>();
    c.segclass_prior = manifest.at("segclass_prior").get<bool>();
    c.prior_floor = manifest.at("prior_floor").get<double>();
    c.prior_segment_weight = manifest.at("prior_segment_weight").get<double>();
    c.seg_window = manifest.at("seg_window").get<std::size_t>();
    if (m.variant != Variant::b2_no_cpd) m.cpd = cpd::autoencoder_from_checkpoint(nn::load_checkpoint_file(need(kCpdFile)));
    if (c.segclass_prior) m.seg = seg::classifier_from_checkpoint(nn::load_checkpoint_file(need(kSegFile))).model;
    m.task2 = head_from_checkpoint(nn::load_checkpoint_file(need(kTask2File)), "smtcnn-task2", 2);
    m.task3 = head_from_checkpoint(nn::load_checkpoint_file(need(kTask3File)), "smtcnn-task3", kClasses);
    return m;
}

}  // namespace faultlab::cascade
