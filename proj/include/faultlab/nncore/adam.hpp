#pragma once

#include <cmath>

#include "faultlab/nncore/tensor.hpp"

namespace faultlab::nn {

struct AdamConfig {
    double alpha = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Moment estimates flattened in ParamViews order.
struct AdamState {
    AdamConfig config;
    Vector m;
    Vector v;
    std::size_t t = 0;

    AdamState() = default;
    AdamState(const AdamConfig& cfg, std::size_t n) : config(cfg), m(n, 0.0), v(n, 0.0) {
        require(cfg.beta1 > 0 && cfg.beta1 < 1 && cfg.beta2 > 0 && cfg.beta2 < 1, "AdamState: betas must lie in (0,1)");
    }
};

/// Bias-corrected Adam update. The step counter is advanced before the update.
inline void adam_step(const ParamViews& params, const ParamViews& grads, AdamState& st) {
    require_shape(params.size() == grads.size(), "adam_step: parameter/gradient group count mismatch");
    const std::size_t n = total_size(params);
    if (st.m.empty() && n > 0) {
        st.m.assign(n, 0.0);
        st.v.assign(n, 0.0);
    }
    require_shape(st.m.size() == n && st.v.size() == n, "adam_step: optimizer state does not match parameters");

    st.t += 1;
    const auto& c = st.config;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(st.t));
    std::size_t k = 0;
    for (std::size_t gi = 0; gi < params.size(); ++gi) {
        auto p = params[gi];
        auto g = grads[gi];
        require_shape(p.size() == g.size(), "adam_step: gradient group size mismatch");
        for (std::size_t j = 0; j < p.size(); ++j, ++k) {
            st.m[k] = c.beta1 * st.m[k] + (1.0 - c.beta1) * g[j];
            st.v[k] = c.beta2 * st.v[k] + (1.0 - c.beta2) * g[j] * g[j];
            const double mhat = st.m[k] / bc1;
            const double vhat = st.v[k] / bc2;
            p[j] -= c.alpha * mhat / (std::sqrt(vhat) + c.epsilon);
        }
    }
}

}  // namespace faultlab::nn
