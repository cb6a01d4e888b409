#pragma once

#include <array>
#include <cmath>

#include "faultlab/nncore/checkpoint.hpp"
#include "faultlab/nncore/tensor.hpp"
#include "faultlab/simgen.hpp"

namespace faultlab {

/// Telemetry feature channels, in column order of the feature matrix.
inline constexpr std::size_t kNumChannels = 3;

/// T x 3 matrix of (energy, cpu, duration); the timestamp is the row index.
inline nn::Tensor2 feature_matrix(const sim::TimeSeriesDataset& ds) {
    nn::Tensor2 x(ds.size(), kNumChannels);
    for (std::size_t t = 0; t < ds.size(); ++t) {
        const auto& r = ds.records[t];
        x(t, 0) = r.energy;
        x(t, 1) = r.cpu;
        x(t, 2) = r.duration;
    }
    return x;
}

/// Per-channel z-score normalization.
struct ChannelScaler {
    std::vector<double> mean;
    std::vector<double> scale;

    static ChannelScaler fit(const nn::Tensor2& x) {
        require(x.rows > 0, "ChannelScaler::fit: empty data");
        ChannelScaler s{std::vector<double>(x.cols, 0.0), std::vector<double>(x.cols, 0.0)};
        for (std::size_t t = 0; t < x.rows; ++t)
            for (std::size_t c = 0; c < x.cols; ++c) s.mean[c] += x(t, c);
        for (double& m : s.mean) m /= static_cast<double>(x.rows);
        for (std::size_t t = 0; t < x.rows; ++t)
            for (std::size_t c = 0; c < x.cols; ++c) s.scale[c] += (x(t, c) - s.mean[c]) * (x(t, c) - s.mean[c]);
        for (double& v : s.scale) {
            v = std::sqrt(v / static_cast<double>(x.rows));
            if (!(v > 1e-12)) v = 1.0;  // constant channel
        }
        return s;
    }

    nn::Tensor2 apply(const nn::Tensor2& x) const {
        require_shape(x.cols == mean.size(), "ChannelScaler::apply: channel count mismatch");
        nn::Tensor2 out = x;
        for (std::size_t t = 0; t < x.rows; ++t)
            for (std::size_t c = 0; c < x.cols; ++c) out(t, c) = (x(t, c) - mean[c]) / scale[c];
        return out;
    }

    nlohmann::json to_json() const { return {{"mean", mean}, {"scale", scale}}; }

    static ChannelScaler from_json(const nlohmann::json& j) {
        return {j.at("mean").get<std::vector<double>>(), j.at("scale").get<std::vector<double>>()};
    }

    friend bool operator==(const ChannelScaler&, const ChannelScaler&) = default;
};

}  // namespace faultlab
