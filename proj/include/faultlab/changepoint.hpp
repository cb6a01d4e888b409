#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

#include "faultlab/features.hpp"
#include "faultlab/nncore.hpp"
#include "faultlab/simgen.hpp"

namespace faultlab::cpd {

/// Half-open record interval [start, end).
struct Segment {
    std::size_t start = 0;
    std::size_t end = 0;

    std::size_t length() const noexcept { return end - start; }
    friend bool operator==(const Segment&, const Segment&) = default;
};

struct ThresholdSpec {
    double mean = 0.0;
    double std = 0.0;
    double k = 3.0;
    double tau = 0.0;

    friend bool operator==(const ThresholdSpec&, const ThresholdSpec&) = default;
};

/// LSTM autoencoder: one encoder per input channel, the concatenated final
/// encoder states are repeated at every step of a decoder LSTM, and a linear
/// head maps decoder states back to the channels.
struct AutoencoderModel {
    std::vector<nn::LstmCellParams> encoders;
    nn::LstmCellParams decoder;
    nn::DenseParams output;
    std::size_t window = 32;
    std::size_t channels = kNumChannels;
    ChannelScaler scaler;
    ThresholdSpec threshold;

    AutoencoderModel() = default;
    AutoencoderModel(std::size_t n_channels, std::size_t window_len, std::size_t encoder_hidden, std::size_t decoder_hidden)
        : decoder(n_channels * encoder_hidden, decoder_hidden),
          output(decoder_hidden, n_channels, nn::Activation::identity),
          window(window_len),
          channels(n_channels) {
        for (std::size_t c = 0; c < n_channels; ++c) encoders.emplace_back(1, encoder_hidden);
    }

    void init(Rng& rng) {
        for (auto& e : encoders) e.init(rng);
        decoder.init(rng);
        output.init(rng);
    }

    std::size_t code_size() const {
        std::size_t n = 0;
        for (const auto& e : encoders) n += e.hidden_size;
        return n;
    }

    nn::ParamViews parameters() {
        nn::ParamViews v;
        for (auto& e : encoders) e.append_views(v);
        decoder.append_views(v);
        output.append_views(v);
        return v;
    }

    void validate() const {
        require_shape(encoders.size() == channels, "AutoencoderModel: one encoder per channel required");
        require_shape(decoder.input_dim() == code_size(), "AutoencoderModel: decoder input must equal concatenated code");
        require_shape(output.in_dim() == decoder.hidden_size && output.out_dim() == channels,
                      "AutoencoderModel: output head shape mismatch");
    }

    friend bool operator==(const AutoencoderModel&, const AutoencoderModel&) = default;
};

struct AutoencoderConfig {
    std::size_t window = 32;
    std::size_t encoder_hidden = 8;
    std::size_t decoder_hidden = 16;
    std::size_t train_stride = 4;
    std::size_t max_train_windows = 2000;
    double val_fraction = 0.2;
    std::size_t threshold_stride = 1;
    double k = 3.0;
    nn::TrainConfig train{.max_epochs = 40, .batch_size = 32, .adam = {.alpha = 3e-3}, .early_stopping = true,
                          .early = {.patience = 5, .min_delta = 0.0, .restore_best = true}, .seed = 0};
};

namespace detail {

struct AeCache {
    std::vector<nn::LstmCache> enc;
    nn::LstmCache dec;
    nn::Tensor2 dec_out;
};

}  // namespace detail

/// Reconstructs one normalized window (W x channels).
inline nn::Tensor2 reconstruct(const AutoencoderModel& m, const nn::Tensor2& win, detail::AeCache* cache = nullptr) {
    require_shape(win.cols == m.channels, "reconstruct: window has " + std::to_string(win.cols) + " channels, model expects " +
                                              std::to_string(m.channels));
    detail::AeCache local;
    detail::AeCache& cc = cache ? *cache : local;
    cc.enc.resize(m.channels);
    const auto W = win.rows;
    nn::Vector code;
    code.reserve(m.code_size());
    nn::Tensor2 col(W, 1);
    for (std::size_t c = 0; c < m.channels; ++c) {
        for (std::size_t t = 0; t < W; ++t) col(t, 0) = win(t, c);
        const auto h = nn::lstm_layer_forward(col, m.encoders[c], &cc.enc[c]);
        const auto last = h.row(W - 1);
        code.insert(code.end(), last.begin(), last.end());
    }
    nn::Tensor2 dec_in(W, code.size());
    for (std::size_t t = 0; t < W; ++t) std::copy(code.begin(), code.end(), dec_in.row(t).begin());
    cc.dec_out = nn::lstm_layer_forward(dec_in, m.decoder, &cc.dec);
    nn::Tensor2 out(W, m.channels);
    for (std::size_t t = 0; t < W; ++t) {
        const auto y = nn::dense_forward(cc.dec_out.row(t), m.output);
        std::copy(y.begin(), y.end(), out.row(t).begin());
    }
    return out;
}

/// MSE of one window; accumulates `scale * dLoss/dparams` into `grad`.
inline double window_loss_grad(const AutoencoderModel& m, const nn::Tensor2& win, AutoencoderModel& grad, double scale) {
    detail::AeCache cc;
    const auto recon = reconstruct(m, win, &cc);
    auto lg = nn::mse_loss(recon, win);
    for (double& g : lg.grad.data) g *= scale;
    const auto W = win.rows;
    nn::Tensor2 d_dec(W, m.decoder.hidden_size);
    for (std::size_t t = 0; t < W; ++t)
        nn::dense_backward_pre(cc.dec_out.row(t), lg.grad.row(t), m.output, grad.output, d_dec.row(t));
    const auto db = nn::lstm_layer_backward(cc.dec, m.decoder, d_dec, grad.decoder);
    nn::Vector d_code(m.code_size(), 0.0);
    for (std::size_t t = 0; t < W; ++t)
        for (std::size_t k = 0; k < d_code.size(); ++k) d_code[k] += db.d_inputs(t, k);
    std::size_t offset = 0;
    for (std::size_t c = 0; c < m.channels; ++c) {
        const auto H = m.encoders[c].hidden_size;
        nn::Tensor2 d_enc(W, H);
        std::copy(d_code.begin() + static_cast<long>(offset), d_code.begin() + static_cast<long>(offset + H),
                  d_enc.row(W - 1).begin());
        nn::lstm_layer_backward(cc.enc[c], m.encoders[c], d_enc, grad.encoders[c]);
        offset += H;
    }
    return lg.loss;
}

inline nn::Tensor2 window_at(const nn::Tensor2& x, std::size_t start, std::size_t w) {
    nn::Tensor2 win(w, x.cols);
    std::copy(x.data.begin() + static_cast<long>(start * x.cols), x.data.begin() + static_cast<long>((start + w) * x.cols),
              win.data.begin());
    return win;
}

/// Per-window reconstruction MSE, stride 1: error[i] covers records [i, i+W).
inline std::vector<double> reconstruction_errors(const AutoencoderModel& m, const nn::Tensor2& raw, std::size_t stride = 1) {
    m.validate();
    require_shape(raw.cols == m.channels, "reconstruction_errors: channel count mismatch");
    if (raw.rows < m.window)
        throw InputError("reconstruction_errors: series of length " + std::to_string(raw.rows) +
                         " is shorter than the window " + std::to_string(m.window));
    const auto x = m.scaler.apply(raw);
    std::vector<double> errors;
    errors.reserve((raw.rows - m.window) / stride + 1);
    for (std::size_t i = 0; i + m.window <= raw.rows; i += stride) {
        const auto win = window_at(x, i, m.window);
        errors.push_back(nn::mse_loss(reconstruct(m, win), win).loss);
    }
    return errors;
}

inline std::vector<double> reconstruction_errors(const AutoencoderModel& m, const sim::TimeSeriesDataset& ds) {
    return reconstruction_errors(m, feature_matrix(ds));
}

/// tau = mean + k * std with the population standard deviation.
inline ThresholdSpec compute_threshold(std::span<const double> errors, double k) {
    if (errors.empty()) throw InputError("compute_threshold: no reconstruction errors");
    const double n = static_cast<double>(errors.size());
    const double mean = std::accumulate(errors.begin(), errors.end(), 0.0) / n;
    double ss = 0.0;
    for (double e : errors) ss += (e - mean) * (e - mean);
    const double sd = std::sqrt(ss / n);
    return {mean, sd, k, mean + k * sd};
}

/// Strictly above tau is a change-point.
inline std::vector<bool> detect_changepoints(std::span<const double> errors, const ThresholdSpec& spec) {
    std::vector<bool> flags(errors.size());
    for (std::size_t i = 0; i < errors.size(); ++i) flags[i] = errors[i] > spec.tau;
    return flags;
}

/// Turns window flags into record segments. Runs separated by fewer than
/// `min_gap` unflagged windows merge; runs shorter than `min_len` windows are
/// dropped; window i covers records [i, i+window). Overlapping or touching
/// extents are merged so the result is sorted and disjoint.
inline std::vector<Segment> flags_to_segments(const std::vector<bool>& flags, std::size_t min_gap, std::size_t min_len,
                                              std::size_t window = 1) {
    require(window >= 1, "flags_to_segments: window must be >= 1");
    std::vector<Segment> runs;
    for (std::size_t i = 0; i < flags.size();) {
        if (!flags[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < flags.size() && flags[j]) ++j;
        if (!runs.empty() && i - runs.back().end < min_gap)
            runs.back().end = j;
        else
            runs.push_back({i, j});
        i = j;
    }
    std::vector<Segment> out;
    for (const auto& r : runs) {
        if (r.length() < min_len) continue;
        const Segment ext{r.start, r.end - 1 + window};
        if (!out.empty() && ext.start <= out.back().end)
            out.back().end = std::max(out.back().end, ext.end);
        else
            out.push_back(ext);
    }
    return out;
}

/// Binary membership mask of length `n`.
inline std::vector<double> segments_to_mask(const std::vector<Segment>& segs, std::size_t n) {
    std::vector<double> mask(n, 0.0);
    for (const auto& s : segs) {
        require(s.start < s.end && s.end <= n, "segments_to_mask: segment outside series");
        std::fill(mask.begin() + static_cast<long>(s.start), mask.begin() + static_cast<long>(s.end), 1.0);
    }
    return mask;
}

struct AutoencoderFit {
    AutoencoderModel model;
    nn::TrainHistory history;
    std::vector<double> train_errors;  // errors the threshold was computed from
};

namespace detail {

struct AeObjective {
    const nn::Tensor2& x;
    std::size_t window;
    std::vector<std::size_t> train_starts;
    std::vector<std::size_t> val_starts;

    std::size_t num_train() const { return train_starts.size(); }
    bool has_validation() const { return !val_starts.empty(); }

    double batch_loss(const AutoencoderModel& m, std::span<const std::size_t> idx, AutoencoderModel& g) const {
        const double scale = 1.0 / static_cast<double>(idx.size());
        double total = 0.0;
        for (auto k : idx) total += window_loss_grad(m, window_at(x, train_starts[k], window), g, scale);
        return total * scale;
    }

    double validation_loss(const AutoencoderModel& m) const {
        double total = 0.0;
        for (auto s : val_starts) {
            const auto win = window_at(x, s, window);
            total += nn::mse_loss(reconstruct(m, win), win).loss;
        }
        return total / static_cast<double>(val_starts.size());
    }
};

}  // namespace detail

/// Fits the autoencoder on fault-free telemetry and freezes tau from the
/// training-set reconstruction errors.
inline AutoencoderFit train_autoencoder(const sim::TimeSeriesDataset& normal, const AutoencoderConfig& cfg) {
    if (normal.regime != sim::Regime::normal_only)
        throw InputError("train_autoencoder: expected a normal-only dataset, got " + std::string(sim::to_string(normal.regime)));
    if (normal.size() < cfg.window)
        throw InputError("train_autoencoder: dataset of length " + std::to_string(normal.size()) +
                         " is shorter than one window (" + std::to_string(cfg.window) + ")");
    require(cfg.train_stride >= 1 && cfg.threshold_stride >= 1, "train_autoencoder: strides must be >= 1");

    const auto raw = feature_matrix(normal);
    AutoencoderModel m(kNumChannels, cfg.window, cfg.encoder_hidden, cfg.decoder_hidden);
    m.scaler = ChannelScaler::fit(raw);
    Rng rng(mix64(cfg.train.seed ^ 0xae));
    m.init(rng);
    const auto x = m.scaler.apply(raw);

    std::vector<std::size_t> starts;
    for (std::size_t s = 0; s + cfg.window <= x.rows; s += cfg.train_stride) starts.push_back(s);
    if (starts.size() > cfg.max_train_windows) {
        std::vector<std::size_t> thinned;
        for (std::size_t k = 0; k < cfg.max_train_windows; ++k)
            thinned.push_back(starts[k * starts.size() / cfg.max_train_windows]);
        starts.swap(thinned);
    }
    detail::AeObjective obj{x, cfg.window, {}, {}};
    const auto n_val = static_cast<std::size_t>(std::floor(cfg.val_fraction * static_cast<double>(starts.size())));
    obj.train_starts.assign(starts.begin(), starts.end() - static_cast<long>(n_val));
    obj.val_starts.assign(starts.end() - static_cast<long>(n_val), starts.end());

    nn::TrainConfig tc = cfg.train;
    if (obj.val_starts.empty() || obj.train_starts.empty()) {
        tc.early_stopping = false;
        if (obj.train_starts.empty()) obj.train_starts = obj.val_starts;
    }
    AutoencoderFit fit;
    fit.history = nn::train(m, obj, tc);
    fit.train_errors = reconstruction_errors(m, raw, cfg.threshold_stride);
    m.threshold = compute_threshold(fit.train_errors, cfg.k);
    fit.model = std::move(m);
    return fit;
}

inline nlohmann::json to_checkpoint(const AutoencoderModel& m, const nn::AdamConfig& adam = {}) {
    auto j = nn::make_checkpoint("changepoint-autoencoder");
    for (std::size_t c = 0; c < m.encoders.size(); ++c)
        j["layers"].push_back(nn::layer_json("encoder_" + std::to_string(c), m.encoders[c]));
    j["layers"].push_back(nn::layer_json("decoder", m.decoder));
    j["layers"].push_back(nn::layer_json("output", m.output));
    j["optimizer"] = nn::optimizer_json(adam);
    j["meta"] = {{"window", m.window},
                 {"channels", m.channels},
                 {"scaler", m.scaler.to_json()},
                 {"threshold", {{"mean", m.threshold.mean}, {"std", m.threshold.std}, {"k", m.threshold.k}, {"tau", m.threshold.tau}}}};
    return j;
}

inline AutoencoderModel autoencoder_from_checkpoint(const nlohmann::json& j) {
    nn::check_header(j, "changepoint-autoencoder");
    AutoencoderModel m;
    const auto& meta = j.at("meta");
    m.window = meta.at("window").get<std::size_t>();
    m.channels = meta.at("channels").get<std::size_t>();
    const auto& layers = j.at("layers");
    if (layers.size() != m.channels + 2) throw ParseError("changepoint checkpoint: unexpected layer count");
    for (std::size_t c = 0; c < m.channels; ++c) m.encoders.push_back(nn::lstm_from_json(layers[c], "encoder_" + std::to_string(c)));
    m.decoder = nn::lstm_from_json(layers[m.channels], "decoder");
    m.output = nn::dense_from_json(layers[m.channels + 1], "output");
    m.scaler = ChannelScaler::from_json(meta.at("scaler"));
    const auto& th = meta.at("threshold");
    m.threshold = {th.at("mean").get<double>(), th.at("std").get<double>(), th.at("k").get<double>(), th.at("tau").get<double>()};
    m.validate();
    return m;
}

/// Replaces the multiplier and recomputes tau from the stored statistics.
inline void set_threshold_k(AutoencoderModel& m, double k) {
    m.threshold.k = k;
    m.threshold.tau = m.threshold.mean + k * m.threshold.std;
}

inline void write_segments_csv(const std::vector<Segment>& segs, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out << "start,end\n";
    for (const auto& s : segs) out << s.start << ',' << s.end << '\n';
}

}  // namespace faultlab::cpd
